// One PASS/FAIL line per acceptance criterion; nonzero exit on any failure.
#include <cstdio>

#include "osep/harness.hpp"

using namespace osep;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

LemmaCheckResult check(const std::string& id, std::map<std::string, double> params = {}) {
  return lemma_check(id, params, SeedPath(7).child(id, 0));
}

AttackReport attack(const std::string& kind, std::map<std::string, double> params = {}) {
  ExperimentConfig cfg;
  cfg.kind = "attack";
  cfg.attack = kind;
  return run_attack_item(cfg, Item{"attack", kind, std::move(params)});
}

}  // namespace

int main() {
  {
    auto r = check("swap-identities");
    report("swap-identities", r.pass, fmt("max residual %.2e (n <= 6, 100 seeds)", r.lhs));
  }
  {
    auto r = check("Eq68-choi-norm");
    report("choi-shrinkage", r.pass, fmt("n=5 norm %.6f, max deviation %.1e", r.lhs, r.extras["max_deviation"]));
  }
  {
    auto r = check("L2.10");
    report("symmetric-moment", r.pass, fmt("worst trace distance %.4f (tol %.2f)", r.lhs, r.bound));
  }
  {
    auto a = check("L2.12"), b = check("L6.11"), c = check("L6.12");
    auto two = [](LemmaCheckResult& r) {
      return fmt("%.3f/%.3f", r.ratio, r.extras.count("ratio_doubled") ? r.extras["ratio_doubled"] : NAN);
    };
    report("moment-rates", a.pass && b.pass && c.pass,
           "ratios L2.12 " + two(a) + "  L6.11 " + two(b) + "  L6.12 " + two(c) + " (<= 4)");
  }
  {
    auto r = check("block-encoding");
    report("block-encoding", r.pass, fmt("max error %.2e over 50 states", r.lhs));
  }
  {
    auto r = check("discrimination");
    report("discrimination", r.pass, fmt("error rate %.4f (bound %.4f)", r.lhs, r.bound));
  }
  {
    auto a = check("L5.10"), b = check("L5.11");
    report("support-retention-leakage", a.pass && b.pass,
           fmt("ratios %.3f, %.3f; violations %.0f", a.ratio, b.ratio,
               a.extras["violations"] + b.extras["violations"]));
  }
  {
    auto r = check("tomography");
    report("tomography", r.pass, fmt("exact error %.2e, sampled success rate %.3f", r.extras["exact_error"], r.extras["success_rate"]));
  }
  {
    auto r = check("L5.8");
    report("support-bound", r.pass,
           fmt("Tr[Q haar] lambda=1..3: %.4f %.4f %.5f", r.extras["trace_lambda1"], r.extras["trace_lambda2"],
               r.extras["trace_lambda3"]));
  }

  std::vector<AttackReport> runs;
  {
    auto r = attack("pru");
    runs.push_back(r);
    report("attack-pru", r.advantage >= 0.9 && r.haar_acceptance <= 0.1,
           fmt("advantage %.4f, haar acceptance %.4f", r.advantage, r.haar_acceptance));
  }
  {
    auto r = attack("pri", {{"s", 1}});
    runs.push_back(r);
    report("attack-pri", r.advantage >= 0.9, fmt("advantage %.4f", r.advantage));
  }
  {
    auto r = attack("pri-vs-hri", {{"s", 0}});
    runs.push_back(r);
    report("attack-pri-vs-hri", r.advantage >= 0.9, fmt("advantage %.4f", r.advantage));
  }
  {
    for (const auto& it : suite_items("all"))
      if (it.type == "attack" && !it.params.empty()) runs.push_back(attack(it.id, it.params));
    int bad = 0;
    double worst = 0;
    for (const auto& r : runs) {
      if (!r.hybrid_ok || !r.composition_ok) ++bad;
      if (r.hybrid_bound > 0) worst = std::max(worst, r.hybrid_distance / r.hybrid_bound);
    }
    report("hybrid-bookkeeping", bad == 0,
           fmt("%.0f runs, %.0f violations, worst distance/bound %.3f", double(runs.size()), bad, worst));
  }
  {
    auto a = check("L4.3"), b = check("L4.5");
    report("prfsg-game", a.pass && b.pass,
           fmt("mean advantage %.4f (bound %.4f), exceedance %.3f", a.lhs, a.bound * a.calibration, b.lhs));
  }
  {
    auto a = check("L2.3", {{"trials", 100}}), b = check("L4.4", {{"trials", 100}});
    report("lipschitz", a.pass && b.pass,
           fmt("worst ratios %.3f (2T), %.3f (8T) over 100 pairs each", a.ratio, b.ratio));
  }
  {
    auto r = check("C6.8", {{"trials", 50}});
    report("transpose-identity", r.pass, fmt("max residual %.2e over 50 isometries", r.lhs));
  }

  std::printf("%s\n", failures == 0 ? "ALL PASS" : (std::to_string(failures) + " FAILED").c_str());
  return failures == 0 ? 0 : 1;
}
