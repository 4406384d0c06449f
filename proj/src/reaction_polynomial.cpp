#include "fastdiff/reaction_polynomial.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fastdiff {

int total_degree(const MultiIndex& l) { return std::accumulate(l.begin(), l.end(), 0); }

double multi_factorial(const MultiIndex& l) {
  double f = 1.0;
  for (int li : l) {
    for (int k = 2; k <= li; ++k) f *= k;
  }
  return f;
}

int ReactionPolynomial::degree() const {
  int d = -1;
  for (const auto& [powers, c] : terms_) d = std::max(d, total_degree(powers));
  return d;
}

double ReactionPolynomial::coefficient(const MultiIndex& powers) const {
  const auto it = terms_.find(powers);
  return it == terms_.end() ? 0.0 : it->second;
}

ReactionPolynomial& ReactionPolynomial::add_term(const MultiIndex& powers, double coeff) {
  if (static_cast<int>(powers.size()) != variables_) {
    throw std::invalid_argument("ReactionPolynomial: multi-index has " +
                                std::to_string(powers.size()) + " entries, expected " +
                                std::to_string(variables_));
  }
  for (int p : powers) {
    if (p < 0) throw std::invalid_argument("ReactionPolynomial: negative exponent");
  }
  if (coeff == 0.0) return *this;
  auto [it, inserted] = terms_.emplace(powers, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
  return *this;
}

ReactionPolynomial& ReactionPolynomial::operator+=(const ReactionPolynomial& other) {
  if (other.variables_ != variables_) {
    throw std::invalid_argument("ReactionPolynomial: variable count mismatch");
  }
  for (const auto& [powers, c] : other.terms_) add_term(powers, c);
  return *this;
}

ReactionPolynomial ReactionPolynomial::operator*(double s) const {
  ReactionPolynomial out(variables_);
  for (const auto& [powers, c] : terms_) out.add_term(powers, c * s);
  return out;
}

double ReactionPolynomial::evaluate(std::span<const double> u) const {
  if (static_cast<int>(u.size()) != variables_) {
    throw std::invalid_argument("ReactionPolynomial::evaluate: wrong number of variables");
  }
  double sum = 0.0;
  for (const auto& [powers, c] : terms_) {
    double t = c;
    for (int i = 0; i < variables_; ++i) {
      for (int k = 0; k < powers[i]; ++k) t *= u[i];
    }
    sum += t;
  }
  return sum;
}

double ReactionPolynomial::lipschitz_bound(double radius) const {
  double l = 0.0;
  for (const auto& [powers, c] : terms_) {
    const int deg = total_degree(powers);
    if (deg == 0) continue;
    l += std::abs(c) * deg * std::pow(radius, deg - 1);
  }
  return l;
}

std::string ReactionPolynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [powers, c] : terms_) {
    os << (first ? "" : " + ") << c;
    first = false;
    for (int i = 0; i < variables_; ++i) {
      if (powers[i] == 0) continue;
      os << "*u" << (i + 1);
      if (powers[i] > 1) os << "^" << powers[i];
    }
  }
  return os.str();
}

ReactionPolynomial multi_index_derivative(const ReactionPolynomial& f, const MultiIndex& l) {
  if (static_cast<int>(l.size()) != f.variables()) {
    throw std::invalid_argument("multi_index_derivative: multi-index size mismatch");
  }
  ReactionPolynomial out(f.variables());
  for (const auto& [powers, c] : f.terms()) {
    double coeff = c;
    MultiIndex reduced = powers;
    bool vanishes = false;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l[i] > powers[i]) {
        vanishes = true;
        break;
      }
      // falling factorial p (p-1) ... (p-l+1)
      for (int k = 0; k < l[i]; ++k) coeff *= powers[i] - k;
      reduced[i] = powers[i] - l[i];
    }
    if (!vanishes) out.add_term(reduced, coeff);
  }
  return out;
}

std::vector<MultiIndex> multi_indices_of_order(int variables, int order) {
  std::vector<MultiIndex> out;
  if (variables <= 0) return out;
  MultiIndex cur(variables, 0);
  // enumerate compositions of `order` into `variables` nonnegative parts
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == variables - 1) {
      cur[pos] = remaining;
      out.push_back(cur);
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      cur[pos] = k;
      self(self, pos + 1, remaining - k);
    }
  };
  rec(rec, 0, order);
  return out;
}

}  // namespace fastdiff
