#include <doctest.h>

#include <sstream>

#include "tfmt/gradcheck.hpp"

using namespace tfmt;

namespace {

std::string report_text(const GradcheckReport& r) {
  std::ostringstream os;
  write_gradcheck_report(os, r);
  return os.str();
}

void check_passes(const GradcheckConfig& cfg) {
  const GradcheckReport r = run_gradcheck(cfg);
  INFO(report_text(r));
  CHECK(r.passed);
  CHECK(r.max_rel_err < 1e-4);
  CHECK(r.retained > 0);
  CHECK(r.loss.l_sup > 0.0);
  CHECK(r.loss.l_uns > 0.0);
  CHECK(r.loss.l_mmd > 0.0);
  for (const auto& g : r.groups) {
    INFO(g.name);
    CHECK(g.checked > 0);
  }
}

}  // namespace

TEST_CASE("gradient check, region head, triplets") { check_passes(GradcheckConfig{}); }

TEST_CASE("gradient check, region head, pairs") {
  GradcheckConfig cfg;
  cfg.task = Task::Aope;
  check_passes(cfg);
}

TEST_CASE("gradient check, cell head") {
  GradcheckConfig cfg;
  cfg.head = HeadKind::Cell;
  check_passes(cfg);
}

TEST_CASE("a corrupted backward pass fails the check") {
  GradcheckConfig cfg;
  cfg.inject_fault = true;
  const GradcheckReport r = run_gradcheck(cfg);
  CHECK_FALSE(r.passed);
  CHECK(r.max_rel_err > 1e-2);
}

TEST_CASE("gradient check is deterministic") {
  const std::string a = report_text(run_gradcheck(GradcheckConfig{}));
  CHECK(a == report_text(run_gradcheck(GradcheckConfig{})));
  CHECK(a.find("group,checked,skipped,max_abs_grad,max_rel_err\n") == 0);
  CHECK(a.find("PASS") != std::string::npos);
}
