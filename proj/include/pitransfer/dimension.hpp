#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

namespace pitransfer {

using Rational = boost::rational<std::int64_t>;

/// Thrown for malformed variable declarations and unusable repeated sets.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a row cannot be made dimensionless, e.g. zero raised to a
/// negative exponent.
class DegenerateRowError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Exponents over the base dimensions M, L, T.
struct DimensionVector {
  Rational mass;
  Rational length;
  Rational time;

  static DimensionVector dimensionless() { return {}; }
  static DimensionVector parse(std::string_view text);

  bool is_dimensionless() const { return *this == DimensionVector{}; }
  std::array<Rational, 3> as_array() const { return {mass, length, time}; }
  std::string to_string() const;

  DimensionVector operator+(const DimensionVector& o) const;
  DimensionVector operator*(const Rational& k) const;
  friend bool operator==(const DimensionVector&, const DimensionVector&) = default;
};

enum class VariableRole { input, output, repeated_candidate };

struct VariableDecl {
  std::string name;
  DimensionVector dimension;
  VariableRole role = VariableRole::input;
};

/// Base-dimension by variable matrix; column j is the dimension of variable j.
class DimensionMatrix {
 public:
  static constexpr std::size_t kBaseDimensions = 3;

  explicit DimensionMatrix(std::vector<VariableDecl> vars);

  const std::vector<VariableDecl>& variables() const { return vars_; }
  std::size_t cols() const { return vars_.size(); }
  const Rational& at(std::size_t dim, std::size_t var) const { return entries_[dim][var]; }
  std::size_t rank() const { return rank_; }
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

 private:
  std::vector<VariableDecl> vars_;
  std::array<std::vector<Rational>, kBaseDimensions> entries_;
  std::size_t rank_ = 0;
};

DimensionMatrix build_dimension_matrix(std::vector<VariableDecl> vars);

/// A monomial over the basis variables. `exponents[j]` belongs to variable j
/// of the owning basis.
struct PiGroup {
  std::string name;
  std::vector<Rational> exponents;

  PiGroup inverted() const;
  bool involves(std::size_t var) const { return exponents[var] != Rational(0); }
};

class PiBasis {
 public:
  PiBasis(std::vector<VariableDecl> variables, std::vector<PiGroup> groups,
          std::vector<std::size_t> repeated);

  const std::vector<VariableDecl>& variables() const { return vars_; }
  const std::vector<PiGroup>& groups() const { return groups_; }
  const std::vector<std::size_t>& repeated() const { return repeated_; }
  std::size_t size() const { return groups_.size(); }

  std::size_t group_index(std::string_view group_name) const;
  std::size_t variable_index(std::string_view var_name) const;

  /// Net dimension of a group; zero for every valid group.
  DimensionVector group_dimension(std::size_t g) const;

  /// Monomial rendering, e.g. "a^1 l^1 v_i^-2". Factors sorted by name.
  std::string monomial(std::size_t g) const;

  /// Replaces group g by its reciprocal.
  PiBasis with_inverted(std::string_view group_name) const;

  /// Evaluates every group on values aligned with variables().
  std::vector<double> transform(std::span<const double> values) const;
  double evaluate(std::size_t g, std::span<const double> values) const;

 private:
  std::vector<VariableDecl> vars_;
  std::vector<PiGroup> groups_;
  std::vector<std::size_t> repeated_;
};

/// Buckingham basis of the rational nullspace. Groups are integer, gcd 1,
/// first nonzero exponent positive, and named pi1..piK.
PiBasis nullspace_pi_basis(const DimensionMatrix& m);

/// One group per non-repeated variable, named after that variable, carrying it
/// with exponent +1.
PiBasis repeated_vars_pi_basis(const DimensionMatrix& m,
                               const std::vector<std::string>& repeated);

/// Map-keyed evaluation: group name -> value.
std::map<std::string, double> transform_row(const PiBasis& basis,
                                            const std::map<std::string, double>& row);

/// Recovers every variable that is the only unknown in some group, given
/// the other variables in `context`.
std::map<std::string, double> inverse_transform_outputs(
    const PiBasis& basis, const std::map<std::string, double>& pi_values,
    const std::map<std::string, double>& context);

/// Parses `name = "M^p L^q T^r" [role]` lines; blank lines and `#` comments
/// are skipped.
std::vector<VariableDecl> parse_variable_decls(std::string_view text);

/// Variable sets of the braking study.
std::vector<VariableDecl> kinematic_variables();
std::vector<VariableDecl> dynamic_variables();

std::string to_string(const Rational& r);

}  // namespace pitransfer
