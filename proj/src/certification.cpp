#include "fpnet/certification.hpp"

#include "fpnet/format.hpp"

#include <limits>
#include <sstream>

namespace fpnet {

double CertificationReport::worst_margin(const std::string& clause) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : checks)
    if (c.clause == clause) worst = std::max(worst, c.measured - c.bound - c.slack);
  return worst;
}

std::string CertificationReport::to_text() const {
  std::ostringstream os;
  os << "certification " << subject << " status=" << (pass ? "PASS" : "FAIL") << '\n';
  for (const auto& [k, v] : stats) os << "stat " << k << '=' << fmt_double(v) << '\n';
  for (const auto& c : checks)
    os << "check clause=" << c.clause << " point=" << c.point << " measured=" << fmt_double(c.measured)
       << " bound=" << fmt_double(c.bound) << " slack=" << fmt_double(c.slack)
       << " status=" << (c.pass ? "PASS" : "FAIL") << '\n';
  return os.str();
}

}  // namespace fpnet
