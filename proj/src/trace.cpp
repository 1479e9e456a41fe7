#include "mprg/trace.hpp"

#include <fstream>

#include "mprg/errors.hpp"
#include "mprg/numfmt.hpp"

namespace mprg {

void write_refine_trajectory(const RunTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "t,error,nu_hat,zeta,warn\n";
  for (const TraceRecord& r : trace.records)
    out << r.t << ',' << format_double(r.error) << ',' << format_double(r.nu_hat) << ','
        << format_double(r.zeta) << ',' << (r.warn ? 1 : 0) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void write_power_trajectory(const RunTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "t,error,correlation\n";
  for (const TraceRecord& r : trace.records)
    out << r.t << ',' << format_double(r.error) << ',' << format_double(r.correlation) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace mprg
