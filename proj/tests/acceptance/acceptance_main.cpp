// Runs the twelve acceptance criteria and prints one PASS/FAIL line each.
// Exit status is 0 only when every criterion passes within its time budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "genpred/analytic.hpp"
#include "genpred/cli/commands.hpp"
#include "genpred/cli/config.hpp"
#include "genpred/experiments.hpp"
#include "genpred/kernel.hpp"
#include "genpred/numerics.hpp"
#include "genpred/qnn.hpp"
#include "gradient_cases.hpp"
#include "reference_net.hpp"

using namespace genpred;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

// 1. g(1 - Phi(theta; mu, alpha)) = 1 - Phi(theta; mu*, sigma*) on 100 random models.
Outcome distortion_identity() {
  RandomSource rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const analytic::NormalNormalModel model{rng.normal(0.0, 5.0), 0.05 + 10.0 * rng.uniform(),
                                            0.05 + 20.0 * rng.uniform()};
    std::vector<double> data(1 + rng.uniform_index(1000));
    const double theta = rng.normal(model.mu, std::sqrt(model.alpha2));
    for (auto& y : data) y = rng.normal(theta, std::sqrt(model.sigma2));
    const auto post = analytic::posterior(model, data);
    worst = std::max(worst, experiments::distortion_identity_error(model, post, 2001));
  }
  return {worst <= 1e-10, fmt("max error %.3g over 100 models x 2001 points", worst)};
}

// 2. Normal-normal numerical example.
Outcome numerical_example() {
  const auto r = experiments::run_normal_normal_demo(cli::RunConfig{}.normal_demo_config());
  const bool ybar_ok = r.y_bar >= 3.2 && r.y_bar <= 3.5;
  const bool mu_ok = r.posterior.mu_star >= 3.14 && r.posterior.mu_star <= 3.43;
  const bool var_exact = r.posterior.sigma2_star == 50.0 / 510.0;
  const bool flagged = !r.variance_matches_reported && !r.discrepancy_note.empty();
  return {ybar_ok && mu_ok && var_exact && flagged,
          fmt("y_bar %.4f, mu* %.4f, sigma*^2 %.6f (%s), 0.98 %s", r.y_bar, r.posterior.mu_star,
              r.posterior.sigma2_star, var_exact ? "= 50/510" : "!= 50/510",
              flagged ? "flagged" : "NOT flagged")};
}

// 3. Efron estimation ratio near pi/2.
Outcome efron_estimation() {
  auto cfg = cli::RunConfig{}.efron_config();
  cfg.n = 1001;
  cfg.replications = 10000;
  const auto r = experiments::efron_estimation_ratio(cfg);
  const double z = (r.value - 1.5708) / r.se;
  return {std::abs(z) <= 3.0, fmt("ratio %.4f, se %.4f, z vs 1.5708 = %.2f", r.value, r.se, z)};
}

// 4. Prediction ratio sweep: some n in [1.015, 1.03]; Monte Carlo agrees with the comparator.
Outcome efron_prediction() {
  const cli::RunConfig run;
  auto cfg = run.efron_config();
  cfg.replications = run.efron_prediction_replications;
  const auto sweep =
      experiments::efron_prediction_sweep(run.efron_sweep, cfg, run.efron_oracle_replications);
  bool any_near = false, all_agree = true;
  std::string hits, worst;
  double worst_z = 0.0;
  for (const auto& p : sweep) {
    const double z = (p.ratio.value - p.comparator.value) / std::hypot(p.ratio.se, p.comparator.se);
    all_agree &= std::abs(z) <= 3.0;
    if (std::abs(z) >= std::abs(worst_z)) {
      worst_z = z;
      worst = std::to_string(p.n);
    }
    if (p.ratio.value >= 1.015 && p.ratio.value <= 1.03) {
      any_near = true;
      hits += fmt(" n=%zu:%.4f", p.n, p.ratio.value);
    }
  }
  return {any_near && all_agree,
          "ratio in [1.015, 1.03] at" + (hits.empty() ? std::string(" none") : hits) +
              fmt("; worst |z| vs comparator %.2f", std::abs(worst_z)) + " at n=" + worst};
}

// 5. CQR coverage and width on the heteroscedastic design.
Outcome cqr_coverage() {
  auto cfg = cli::RunConfig{}.coverage_config();
  cfg.dgp = experiments::Dgp::heteroscedastic;
  cfg.alpha = 0.1;
  cfg.n_train = 1000;
  cfg.n_cal = 500;
  cfg.n_test = 1000;
  cfg.replications = 200;
  cfg.inner_probe = 0.2;
  cfg.outer_probe = 2.0;
  const auto r = experiments::run_coverage_bench(cfg);
  const auto& cqr = r.methods[1];
  const double ratio = r.cqr_width_outer.value / r.cqr_width_inner.value;
  const bool cov_ok = cqr.coverage.value >= 0.89 && cqr.coverage.value <= 0.93;
  return {cov_ok && ratio >= 2.0 && r.failures == 0,
          fmt("coverage %.4f (se %.4f), width |x|=2 / |x|=0.2 = %.2f, failures %zu",
              cqr.coverage.value, cqr.coverage.se, ratio, r.failures)};
}

// 6. Analytic gradients against central differences of an independent implementation.
Outcome gradients() {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto c = cases::make_gradient_case(seed);
    qnn::TrainingConfig cfg;
    cfg.huber_kappa = c.kappa;
    const auto lg = qnn::loss_and_gradient(c.net, c.batch, c.taus, cfg);
    const auto check = reference::check_gradient(c.net, c.batch, c.taus.levels(), c.kappa, lg.gradient);
    worst = std::max(worst, check.worst_relative);
    checked += check.checked;
    skipped += check.skipped;
  }
  return {worst < 1e-4 && checked > 0,
          fmt("worst relative error %.3g over %zu coordinates (%zu near kinks skipped)", worst,
              checked, skipped)};
}

// 7. Increments-mode outputs never cross.
Outcome monotonicity() {
  RandomSource rng(707);
  qnn::NetworkSpec spec;
  spec.input_dim = 3;
  spec.hidden = {8, 8};
  spec.grid = qnn::QuantileGrid({0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99});
  std::size_t pairs = 0, violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    spec.activation = trial % 2 ? qnn::Activation::tanh : qnn::Activation::relu;
    qnn::QuantileNetwork net(spec, rng);
    const double scale = std::pow(10.0, rng.uniform(-2.0, 2.0));
    for (double& p : net.parameters()) p = scale * rng.normal();
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> x{rng.normal(0.0, 10.0), rng.normal(), rng.uniform(-100.0, 100.0)};
      const auto q = qnn::forward(net, x);
      for (std::size_t k = 0; k + 1 < q.size(); ++k) violations += q[k] > q[k + 1];
      ++pairs;
    }
  }
  return {violations == 0 && pairs == 100000,
          fmt("%zu violations over %zu (parameters, input) pairs", violations, pairs)};
}

// 8. Three forms of the pinball loss agree exactly.
Outcome pinball_equivalence() {
  RandomSource rng(808);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000000; ++i) {
    const double u = rng.normal() * std::pow(10.0, rng.uniform(-6.0, 6.0));
    const double tau = rng.uniform();
    const double indicator_form = u * (tau - (u < 0.0 ? 1.0 : 0.0));
    const double a = qnn::pinball_loss(u, tau);
    mismatches += !(a == indicator_form && a == qnn::pinball_loss_max_form(u, tau));
  }
  return {mismatches == 0, fmt("%zu mismatches over 1e6 (u, tau)", mismatches)};
}

// Brute force inf{t : F(t) >= tau} on a sorted sample.
double brute_quantile(const std::vector<double>& sorted, double tau) {
  const double n = static_cast<double>(sorted.size());
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    if (static_cast<double>(k) / n >= tau) return sorted[k - 1];
  }
  return sorted.back();
}

// 9. Quantiles commute with monotone maps; Q(F(y)) = y on the sample.
Outcome parzen() {
  RandomSource rng(909);
  const std::vector<std::function<double(double)>> maps{
      [](double v) { return std::exp(v); },
      [](double v) { return 3.0 * v - 2.0; },
      [](double v) { return v * v * v; },
      [](double v) { return std::atan(v); },
      [](double v) { return std::floor(2.0 * v); },  // non-decreasing with ties
  };
  std::size_t failures = 0, checks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(1 + rng.uniform_index(200));
    const bool ties = trial % 3 == 0;
    for (auto& v : x) v = ties ? std::round(rng.normal() * 3.0) / 3.0 : rng.normal();
    const EmpiricalDistribution dist(x);
    const auto& g = maps[static_cast<std::size_t>(trial) % maps.size()];
    std::vector<double> mapped(x.size());
    std::transform(x.begin(), x.end(), mapped.begin(), g);
    std::sort(mapped.begin(), mapped.end());
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 1; k <= 99; ++k) {
      const UnitInterval tau(k / 100.0);
      const bool lib = composite_quantile_check(dist, g, tau);
      const bool brute = brute_quantile(mapped, tau.value()) == g(brute_quantile(sorted, tau.value()));
      failures += !(lib && brute);
      ++checks;
    }
    for (double y : x) {
      failures += empirical_quantile(dist, UnitInterval(dist.cdf(y))) != y;
      ++checks;
    }
  }
  return {failures == 0, fmt("%zu failures over %zu checks on 1000 samples", failures, checks)};
}

// 10. Nadaraya-Watson bandwidth limits.
Outcome kernel_limits() {
  RandomSource rng(1010);
  Dataset data(40, 2);
  for (std::size_t i = 0; i < data.rows; ++i) {
    data.features[2 * i] = static_cast<double>(i % 8);  // separated grid points
    data.features[2 * i + 1] = static_cast<double>(i / 8);
    data.targets[i] = rng.normal();
  }
  double mean = 0.0;
  for (double y : data.targets) mean += y;
  mean /= static_cast<double>(data.rows);
  double flat = 0.0, sharp = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> q{rng.uniform(0.0, 7.0), rng.uniform(0.0, 4.0)};
    flat = std::max(flat, std::abs(kernel::nw_estimate(data, q, {1e6, kernel::KernelForm::radial}) - mean));
  }
  for (std::size_t i = 0; i < data.rows; ++i) {
    const double got = kernel::nw_estimate(data, data.row(i), {1e-3, kernel::KernelForm::radial});
    sharp = std::max(sharp, std::abs(got - data.targets[i]));
  }
  return {flat < 1e-6 && sharp < 1e-12,
          fmt("|est - mean| at sigma=1e6: %.3g; |est - y_i| at sigma=1e-3: %.3g", flat, sharp)};
}

// 11. Least-squares weights of theta on (y_1..y_5) are exchangeable and track y_bar.
Outcome sufficiency() {
  RandomSource rng(1111);
  const analytic::NormalNormalModel model{0.0, 5.0, 10.0};
  const auto sims = analytic::simulate(model, 5, 100000, rng);
  const auto fit = analytic::learn_sufficient_statistic(sims);
  const auto [lo, hi] = std::minmax_element(fit.weights.begin(), fit.weights.end());
  const double spread = *hi - *lo;
  const double corr = analytic::statistic_mean_correlation(fit, sims);
  return {spread < 0.01 && corr >= 0.999,
          fmt("max pairwise weight difference %.4f, corr(statistic, y_bar) %.6f", spread, corr)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    files[fs::relative(entry.path(), dir).string()] = buf.str();
  }
  return files;
}

// 12. Each demo run twice with the same config writes identical bytes.
Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "genpred_acceptance_repro";
  fs::remove_all(root);
  std::string detail;
  bool pass = true;
  for (auto demo : {cli::Demo::normal_normal, cli::Demo::efron, cli::Demo::coverage}) {
    cli::RunConfig cfg;
    cfg.out = (root / cli::to_string(demo)).string();
    cli::cmd_demo(demo, cfg);
    const auto first = snapshot(cfg.out);
    cli::cmd_demo(demo, cfg);
    const auto second = snapshot(cfg.out);
    const bool same = !first.empty() && first == second;
    pass &= same;
    detail += fmt("%s%s: %zu files %s", detail.empty() ? "" : "; ", cli::to_string(demo).c_str(),
                  first.size(), same ? "identical" : "DIFFER");
  }
  fs::remove_all(root);
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "distortion identity", 1.0, distortion_identity},
      {2, "normal-normal numerical example", 1.0, numerical_example},
      {3, "Efron estimation ratio", 30.0, efron_estimation},
      {4, "Efron prediction ratio", 60.0, efron_prediction},
      {5, "CQR coverage", 600.0, cqr_coverage},
      {6, "gradient correctness", 30.0, gradients},
      {7, "monotonicity", 10.0, monotonicity},
      {8, "pinball equivalence", 5.0, pinball_equivalence},
      {9, "Parzen identities", 10.0, parzen},
      {10, "kernel limits", 1.0, kernel_limits},
      {11, "sufficiency via OLS", 30.0, sufficiency},
      {12, "reproducibility", 0.0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = c.budget_seconds <= 0.0 || seconds <= c.budget_seconds;
    const bool pass = outcome.pass && in_budget;
    failed += !pass;
    const std::string budget =
        c.budget_seconds > 0.0 ? fmt("%.2f s / %g s", seconds, c.budget_seconds) : fmt("%.2f s", seconds);
    std::printf("%s %2d %-32s [%s] %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                budget.c_str(), outcome.detail.c_str(), in_budget ? "" : " (over time budget)");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
