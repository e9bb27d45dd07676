#include "concord/mcmc_stats.hpp"

#include "concord/errors.hpp"

#include <algorithm>
#include <cmath>

namespace concord {

namespace {

double chain_mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double chain_var(const std::vector<double>& x, double m) {
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

void check_chains(const std::vector<std::vector<double>>& chains, std::size_t min_len) {
  if (chains.empty()) throw ValidationError("no chains given");
  for (const auto& c : chains) {
    if (c.size() != chains.front().size()) throw ValidationError("chains must have equal length");
  }
  if (chains.front().size() < min_len) throw ValidationError("chains are too short");
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
  check_chains(chains, 4);
  const std::size_t half = chains.front().size() / 2;
  std::vector<std::vector<double>> parts;
  for (const auto& c : chains) {
    parts.emplace_back(c.begin(), c.begin() + half);
    parts.emplace_back(c.end() - half, c.end());
  }
  const double n = static_cast<double>(half);
  const double m = static_cast<double>(parts.size());
  std::vector<double> means;
  double W = 0.0;
  for (const auto& p : parts) {
    means.push_back(chain_mean(p));
    W += chain_var(p, means.back());
  }
  W /= m;
  const double grand = chain_mean(means);
  double B = 0.0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= n / (m - 1.0);
  if (!(W > 0.0)) return B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  check_chains(chains, 4);
  const std::size_t n = chains.front().size();
  const double nd = static_cast<double>(n);
  const double m = static_cast<double>(chains.size());
  const double total = m * nd;

  std::vector<double> means;
  double W = 0.0;
  for (const auto& c : chains) {
    means.push_back(chain_mean(c));
    W += chain_var(c, means.back());
  }
  W /= m;
  double var_plus = W * (nd - 1.0) / nd;
  if (chains.size() > 1) {
    const double grand = chain_mean(means);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    var_plus += b / (m - 1.0);
  }
  if (!(var_plus > 0.0)) return total;

  // Mean over chains of the biased autocovariance at lag t.
  auto mean_acov = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      const auto& x = chains[c];
      double s = 0.0;
      for (std::size_t k = 0; k + t < n; ++k) s += (x[k] - means[c]) * (x[k + t] - means[c]);
      acc += s / nd;
    }
    return acc / m;
  };
  auto rho = [&](std::size_t t) { return 1.0 - (W - mean_acov(t)) / var_plus; };

  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);  // monotone
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(total));
  return std::min(total / tau, total);
}

}  // namespace concord
