#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace fastdiff {

/// Multi-index l in N_0^n.
using MultiIndex = std::vector<int>;

int total_degree(const MultiIndex& l);
/// l! = prod_i l_i!
double multi_factorial(const MultiIndex& l);

/// Polynomial in n variables: sum over l of c_l u^l, with u^l = prod_i u_i^{l_i}.
/// Coefficients are kept in a canonical map; exact zeros are dropped.
class ReactionPolynomial {
 public:
  ReactionPolynomial() = default;
  explicit ReactionPolynomial(int variables) : variables_(variables) {}

  int variables() const { return variables_; }
  /// Maximal total degree; -1 for the zero polynomial.
  int degree() const;
  bool is_zero() const { return terms_.empty(); }

  const std::map<MultiIndex, double>& terms() const { return terms_; }
  double coefficient(const MultiIndex& powers) const;

  /// Adds c u^powers to the polynomial.
  ReactionPolynomial& add_term(const MultiIndex& powers, double coeff);
  ReactionPolynomial& operator+=(const ReactionPolynomial& other);
  ReactionPolynomial operator*(double s) const;

  double evaluate(std::span<const double> u) const;

  /// Sum over terms of |c| |l| R^{|l|-1}: bounds the l1 norm of the gradient on
  /// the sup-norm ball of radius R.
  double lipschitz_bound(double radius) const;

  std::string to_string() const;

 private:
  int variables_ = 0;
  std::map<MultiIndex, double> terms_;
};

/// D^l F = d^{l_1}/du_1^{l_1} ... d^{l_n}/du_n^{l_n} F, exact on coefficients.
ReactionPolynomial multi_index_derivative(const ReactionPolynomial& f, const MultiIndex& l);

/// All multi-indices of n variables with |l| = order.
std::vector<MultiIndex> multi_indices_of_order(int variables, int order);

}  // namespace fastdiff
