#include "ecm/bruteforce.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ecm/logspace.hpp"

namespace ecm {

namespace {

// Composition packed 16 bits per destination category (counts <= 1000).
using Key = std::uint64_t;

Key pack(std::span<const std::int64_t> v) {
  Key k = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    k |= static_cast<Key>(v[i]) << (16 * i);
  return k;
}

// Enumerates all compositions of `size` over m cells with multinomial
// log-probabilities; zero-probability cells only ever receive 0.
void enumerate_multinomial(std::int64_t size, std::span<const double> logp,
                           std::span<const double> p,
                           std::vector<std::int64_t>& comp, std::size_t cell,
                           double log_coef_terms,
                           std::vector<std::pair<Key, double>>& out) {
  const std::size_t m = p.size();
  if (cell + 1 == m) {
    comp[cell] = size;
    if (size > 0 && p[cell] == 0.0) return;
    double lp = log_coef_terms;
    if (size > 0) lp += static_cast<double>(size) * logp[cell];
    lp -= log_factorial(size);
    out.emplace_back(pack(comp), lp);
    return;
  }
  for (std::int64_t c = 0; c <= size; ++c) {
    if (c > 0 && p[cell] == 0.0) break;
    comp[cell] = c;
    double lp = log_coef_terms - log_factorial(c);
    if (c > 0) lp += static_cast<double>(c) * logp[cell];
    enumerate_multinomial(size - c, logp, p, comp, cell + 1, lp, out);
  }
}

}  // namespace

double poisson_multinomial_logpmf_bruteforce(
    std::span<const std::int64_t> sizes, const Eigen::MatrixXd& probs,
    std::span<const std::int64_t> target) {
  const std::size_t m1 = sizes.size();
  const std::size_t m2 = static_cast<std::size_t>(probs.cols());
  if (static_cast<std::size_t>(probs.rows()) != m1)
    throw std::invalid_argument("bruteforce pmf: probs shape mismatch");
  if (target.size() != m2)
    throw std::invalid_argument("bruteforce pmf: target length mismatch");
  std::int64_t total = 0;
  for (std::int64_t s : sizes) {
    if (s < 0) throw std::invalid_argument("bruteforce pmf: negative size");
    total += s;
  }
  if (total > 1000 || m2 > 4)
    throw std::invalid_argument("bruteforce pmf: instance above oracle scale");

  std::int64_t target_total = 0;
  for (std::int64_t t : target) {
    if (t < 0) return kNegInf;
    target_total += t;
  }
  if (target_total != total) return kNegInf;

  // states: log P(partial sum == composition)
  std::unordered_map<Key, double> states;
  states[0] = 0.0;
  std::vector<std::int64_t> comp(m2, 0);
  std::vector<double> p(m2), logp(m2);
  std::vector<std::pair<Key, double>> block;

  for (std::size_t l = 0; l < m1; ++l) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < m2; ++j) {
      p[j] = probs(static_cast<int>(l), static_cast<int>(j));
      if (!(p[j] >= 0.0))
        throw std::invalid_argument("bruteforce pmf: negative probability");
      logp[j] = p[j] > 0 ? std::log(p[j]) : kNegInf;
      row_sum += p[j];
    }
    if (std::fabs(row_sum - 1.0) > 1e-9)
      throw std::invalid_argument("bruteforce pmf: row does not sum to 1");
    if (sizes[l] == 0) continue;

    block.clear();
    enumerate_multinomial(sizes[l], logp, p, comp, 0,
                          log_factorial(sizes[l]), block);

    std::unordered_map<Key, double> next;
    next.reserve(states.size() * block.size());
    for (const auto& [key, lp] : states) {
      for (const auto& [bkey, blp] : block) {
        const Key nkey = key + bkey;  // per-coordinate sums (no carries:
                                      // totals <= 1000 per 16-bit lane)
        const double term = lp + blp;
        auto [it, inserted] = next.try_emplace(nkey, term);
        if (!inserted) {
          // two-term log-sum-exp
          double a = it->second, b = term;
          if (a < b) std::swap(a, b);
          it->second = a + std::log1p(std::exp(b - a));
        }
      }
    }
    states = std::move(next);
  }

  auto it = states.find(pack(target));
  return it == states.end() ? kNegInf : it->second;
}

}  // namespace ecm
