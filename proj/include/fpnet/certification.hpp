#pragma once

#include <map>
#include <string>
#include <vector>

namespace fpnet {

/// One Monte-Carlo inequality check: PASS iff measured <= bound + slack.
struct CertificationCheck {
  std::string clause;
  int point = 0;
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool pass = true;
};

struct CertificationReport {
  std::string subject;
  bool pass = true;
  std::vector<CertificationCheck> checks;
  std::map<std::string, double> stats;

  void add(CertificationCheck c) {
    pass = pass && c.pass;
    checks.push_back(std::move(c));
  }
  /// Worst (largest) measured - bound - slack over checks of `clause`.
  double worst_margin(const std::string& clause) const;
  /// Structured text: a header line, one `stat` line per statistic and one
  /// `check` line per inequality.
  std::string to_text() const;
};

}  // namespace fpnet
