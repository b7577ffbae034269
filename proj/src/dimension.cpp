#include "pitransfer/dimension.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace pitransfer {

namespace {

using RationalMatrix = std::vector<std::vector<Rational>>;

struct Echelon {
  RationalMatrix rref;
  std::vector<std::size_t> pivots;  // pivot column of each nonzero row
};

// Reduced row echelon form by fraction-exact Gauss-Jordan elimination.
Echelon reduce(RationalMatrix a) {
  Echelon out;
  const std::size_t rows = a.size();
  const std::size_t cols = rows ? a[0].size() : 0;
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t pivot = r;
    while (pivot < rows && a[pivot][c] == Rational(0)) ++pivot;
    if (pivot == rows) continue;
    std::swap(a[r], a[pivot]);
    const Rational inv = Rational(1) / a[r][c];
    for (auto& x : a[r]) x *= inv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || a[i][c] == Rational(0)) continue;
      const Rational f = a[i][c];
      for (std::size_t k = c; k < cols; ++k) a[i][k] -= f * a[r][k];
    }
    out.pivots.push_back(c);
    ++r;
  }
  out.rref = std::move(a);
  return out;
}

RationalMatrix columns_of(const DimensionMatrix& m, const std::vector<std::size_t>& cols) {
  RationalMatrix a(DimensionMatrix::kBaseDimensions, std::vector<Rational>(cols.size()));
  for (std::size_t d = 0; d < DimensionMatrix::kBaseDimensions; ++d)
    for (std::size_t j = 0; j < cols.size(); ++j) a[d][j] = m.at(d, cols[j]);
  return a;
}

// Integer exponents, gcd 1, first nonzero positive.
std::vector<Rational> canonicalize(std::vector<Rational> v) {
  std::int64_t lcm = 1;
  for (const auto& x : v) lcm = std::lcm(lcm, x.denominator());
  std::int64_t g = 0;
  for (auto& x : v) {
    x *= lcm;
    g = std::gcd(g, x.numerator());
  }
  if (g > 1)
    for (auto& x : v) x /= g;
  auto first = std::find_if(v.begin(), v.end(), [](const Rational& x) { return x != Rational(0); });
  if (first != v.end() && *first < 0)
    for (auto& x : v) x = -x;
  return v;
}

double ipow(double x, std::int64_t n) {
  double r = 1.0;
  for (std::int64_t i = 0; i < n; ++i) r *= x;
  return r;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

Rational parse_rational(std::string_view s) {
  auto parse_int = [&](std::string_view t) {
    if (!t.empty() && t.front() == '+') t.remove_prefix(1);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size() || t.empty())
      throw DimensionError("bad exponent '" + std::string(s) + "'");
    return v;
  };
  auto slash = s.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(s));
  auto den = parse_int(s.substr(slash + 1));
  if (den == 0) throw DimensionError("zero denominator in exponent '" + std::string(s) + "'");
  return Rational(parse_int(s.substr(0, slash)), den);
}

}  // namespace

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

DimensionVector DimensionVector::parse(std::string_view text) {
  std::string cleaned;
  for (char c : text) {
    if (c == '(' || c == ')' || c == '[' || c == ']') continue;
    cleaned.push_back(c == '*' || c == '.' ? ' ' : c);
  }
  DimensionVector out;
  std::istringstream in(cleaned);
  std::string token;
  while (in >> token) {
    if (token == "1" || token == "-") continue;
    const char base = token[0];
    Rational exp(1);
    if (token.size() > 1) {
      if (token[1] != '^') throw DimensionError("bad dimension token '" + token + "'");
      exp = parse_rational(std::string_view(token).substr(2));
    }
    switch (base) {
      case 'M': out.mass += exp; break;
      case 'L': out.length += exp; break;
      case 'T': out.time += exp; break;
      default: throw DimensionError("unknown base dimension '" + token + "'");
    }
  }
  return out;
}

std::string DimensionVector::to_string() const {
  std::string s;
  auto put = [&](char sym, const Rational& e) {
    if (e == Rational(0)) return;
    if (!s.empty()) s += ' ';
    s += sym;
    s += '^';
    s += pitransfer::to_string(e);
  };
  put('M', mass);
  put('L', length);
  put('T', time);
  return s.empty() ? "1" : s;
}

DimensionVector DimensionVector::operator+(const DimensionVector& o) const {
  return {mass + o.mass, length + o.length, time + o.time};
}

DimensionVector DimensionVector::operator*(const Rational& k) const {
  return {mass * k, length * k, time * k};
}

DimensionMatrix::DimensionMatrix(std::vector<VariableDecl> vars) : vars_(std::move(vars)) {
  if (vars_.empty()) throw DimensionError("dimension matrix needs at least one variable");
  std::set<std::string> seen;
  for (const auto& v : vars_) {
    if (v.name.empty()) throw DimensionError("empty variable name");
    if (!seen.insert(v.name).second) throw DimensionError("duplicate variable name '" + v.name + "'");
  }
  for (auto& row : entries_) row.resize(vars_.size());
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const auto col = vars_[j].dimension.as_array();
    for (std::size_t d = 0; d < kBaseDimensions; ++d) entries_[d][j] = col[d];
  }
  RationalMatrix a(entries_.begin(), entries_.end());
  rank_ = reduce(std::move(a)).pivots.size();
}

std::size_t DimensionMatrix::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < vars_.size(); ++j)
    if (vars_[j].name == name) return j;
  throw DimensionError("unknown variable '" + std::string(name) + "'");
}

bool DimensionMatrix::contains(std::string_view name) const {
  return std::any_of(vars_.begin(), vars_.end(), [&](const VariableDecl& v) { return v.name == name; });
}

DimensionMatrix build_dimension_matrix(std::vector<VariableDecl> vars) {
  return DimensionMatrix(std::move(vars));
}

PiGroup PiGroup::inverted() const {
  PiGroup g{name, exponents};
  for (auto& e : g.exponents) e = -e;
  return g;
}

PiBasis::PiBasis(std::vector<VariableDecl> variables, std::vector<PiGroup> groups,
                 std::vector<std::size_t> repeated)
    : vars_(std::move(variables)), groups_(std::move(groups)), repeated_(std::move(repeated)) {
  for (const auto& g : groups_)
    if (g.exponents.size() != vars_.size())
      throw DimensionError("pi group '" + g.name + "' does not match the variable list");
}

std::size_t PiBasis::group_index(std::string_view group_name) const {
  for (std::size_t g = 0; g < groups_.size(); ++g)
    if (groups_[g].name == group_name) return g;
  throw DimensionError("unknown pi group '" + std::string(group_name) + "'");
}

std::size_t PiBasis::variable_index(std::string_view var_name) const {
  for (std::size_t j = 0; j < vars_.size(); ++j)
    if (vars_[j].name == var_name) return j;
  throw DimensionError("unknown variable '" + std::string(var_name) + "'");
}

DimensionVector PiBasis::group_dimension(std::size_t g) const {
  DimensionVector d;
  for (std::size_t j = 0; j < vars_.size(); ++j) d = d + vars_[j].dimension * groups_[g].exponents[j];
  return d;
}

std::string PiBasis::monomial(std::size_t g) const {
  std::vector<std::pair<std::string, Rational>> factors;
  for (std::size_t j = 0; j < vars_.size(); ++j)
    if (groups_[g].exponents[j] != Rational(0)) factors.emplace_back(vars_[j].name, groups_[g].exponents[j]);
  std::sort(factors.begin(), factors.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string s;
  for (const auto& [name, e] : factors) {
    if (!s.empty()) s += ' ';
    s += name + "^" + to_string(e);
  }
  return s;
}

PiBasis PiBasis::with_inverted(std::string_view group_name) const {
  auto groups = groups_;
  auto& g = groups[group_index(group_name)];
  g = g.inverted();
  return PiBasis(vars_, std::move(groups), repeated_);
}

double PiBasis::evaluate(std::size_t g, std::span<const double> values) const {
  if (values.size() != vars_.size())
    throw DimensionError("row has " + std::to_string(values.size()) + " values, basis expects " +
                         std::to_string(vars_.size()));
  double num = 1.0;
  double den = 1.0;
  double fractional = 1.0;
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const Rational& e = groups_[g].exponents[j];
    if (e == Rational(0)) continue;
    const double x = values[j];
    if (x == 0.0 && e < 0)
      throw DegenerateRowError("variable '" + vars_[j].name + "' is zero but carries exponent " +
                               to_string(e) + " in group '" + groups_[g].name + "'");
    if (e.denominator() == 1) {
      if (e > 0)
        num *= ipow(x, e.numerator());
      else
        den *= ipow(x, -e.numerator());
    } else {
      if (x < 0.0)
        throw DegenerateRowError("negative value of '" + vars_[j].name +
                                 "' raised to a fractional exponent");
      fractional *= std::pow(x, static_cast<double>(e.numerator()) / static_cast<double>(e.denominator()));
    }
  }
  return num / den * fractional;
}

std::vector<double> PiBasis::transform(std::span<const double> values) const {
  std::vector<double> out(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) out[g] = evaluate(g, values);
  return out;
}

PiBasis nullspace_pi_basis(const DimensionMatrix& m) {
  std::vector<std::size_t> all(m.cols());
  std::iota(all.begin(), all.end(), 0);
  const auto ech = reduce(columns_of(m, all));
  std::vector<bool> is_pivot(m.cols(), false);
  for (auto c : ech.pivots) is_pivot[c] = true;

  std::vector<PiGroup> groups;
  for (std::size_t f = 0; f < m.cols(); ++f) {
    if (is_pivot[f]) continue;
    std::vector<Rational> x(m.cols(), Rational(0));
    x[f] = 1;
    for (std::size_t r = 0; r < ech.pivots.size(); ++r) x[ech.pivots[r]] = -ech.rref[r][f];
    groups.push_back({"pi" + std::to_string(groups.size() + 1), canonicalize(std::move(x))});
  }
  return PiBasis(m.variables(), std::move(groups), {});
}

PiBasis repeated_vars_pi_basis(const DimensionMatrix& m, const std::vector<std::string>& repeated) {
  std::vector<std::size_t> rep;
  for (const auto& name : repeated) {
    auto j = m.index_of(name);
    if (std::find(rep.begin(), rep.end(), j) != rep.end())
      throw DimensionError("repeated variable '" + name + "' listed twice");
    rep.push_back(j);
  }
  if (rep.size() != m.rank())
    throw DimensionError("repeated set has " + std::to_string(rep.size()) +
                         " variables but the dimension matrix has rank " + std::to_string(m.rank()));
  if (reduce(columns_of(m, rep)).pivots.size() != rep.size())
    throw DimensionError("repeated variables are dimensionally dependent");

  std::vector<PiGroup> groups;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    if (std::find(rep.begin(), rep.end(), j) != rep.end()) continue;
    // Solve  sum_i k_i * dim(rep_i) = -dim(j).
    auto aug = columns_of(m, rep);
    for (std::size_t d = 0; d < DimensionMatrix::kBaseDimensions; ++d) aug[d].push_back(-m.at(d, j));
    const auto ech = reduce(std::move(aug));
    if (!ech.pivots.empty() && ech.pivots.back() == rep.size())
      throw DimensionError("variable '" + m.variables()[j].name +
                           "' is not expressible in the repeated variables");
    std::vector<Rational> x(m.cols(), Rational(0));
    x[j] = 1;
    for (std::size_t r = 0; r < ech.pivots.size(); ++r) x[rep[ech.pivots[r]]] = ech.rref[r][rep.size()];
    groups.push_back({m.variables()[j].name, std::move(x)});
  }
  return PiBasis(m.variables(), std::move(groups), std::move(rep));
}

std::map<std::string, double> transform_row(const PiBasis& basis,
                                            const std::map<std::string, double>& row) {
  const auto& vars = basis.variables();
  std::map<std::string, double> out;
  std::vector<double> values(vars.size(), 1.0);
  for (std::size_t g = 0; g < basis.size(); ++g) {
    for (std::size_t j = 0; j < vars.size(); ++j) {
      if (!basis.groups()[g].involves(j)) continue;
      auto it = row.find(vars[j].name);
      if (it == row.end()) throw DimensionError("row is missing variable '" + vars[j].name + "'");
      values[j] = it->second;
    }
    out[basis.groups()[g].name] = basis.evaluate(g, values);
  }
  return out;
}

std::map<std::string, double> inverse_transform_outputs(
    const PiBasis& basis, const std::map<std::string, double>& pi_values,
    const std::map<std::string, double>& context) {
  const auto& vars = basis.variables();
  std::map<std::string, double> out;
  for (const auto& [group_name, pi] : pi_values) {
    const auto& group = basis.groups()[basis.group_index(group_name)];
    std::vector<std::size_t> unknown;
    for (std::size_t j = 0; j < vars.size(); ++j)
      if (group.involves(j) && !context.contains(vars[j].name)) unknown.push_back(j);
    if (unknown.empty()) continue;
    if (unknown.size() > 1)
      throw DimensionError("group '" + group_name + "' needs context for variable '" +
                           vars[unknown[1]].name + "'");
    const std::size_t u = unknown.front();
    double rest = 1.0;
    for (std::size_t j = 0; j < vars.size(); ++j) {
      if (j == u || !group.involves(j)) continue;
      const double x = context.at(vars[j].name);
      const Rational& e = group.exponents[j];
      if (x == 0.0 && e < 0) throw DegenerateRowError("context variable '" + vars[j].name + "' is zero");
      rest *= std::pow(x, static_cast<double>(e.numerator()) / static_cast<double>(e.denominator()));
    }
    const Rational& e = group.exponents[u];
    const double base = pi / rest;
    double value;
    if (e == Rational(1))
      value = base;
    else if (e == Rational(-1))
      value = 1.0 / base;
    else
      value = std::pow(base, static_cast<double>(e.denominator()) / static_cast<double>(e.numerator()));
    out.emplace(vars[u].name, value);
  }
  return out;
}

std::vector<VariableDecl> parse_variable_decls(std::string_view text) {
  std::vector<VariableDecl> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw DimensionError("line " + std::to_string(lineno) + ": expected name = \"dimensions\"");
    VariableDecl decl;
    decl.name = trim(std::string_view(t).substr(0, eq));
    std::string rhs = trim(std::string_view(t).substr(eq + 1));
    std::string dims = rhs;
    std::string role;
    if (!rhs.empty() && rhs.front() == '"') {
      auto close = rhs.find('"', 1);
      if (close == std::string::npos)
        throw DimensionError("line " + std::to_string(lineno) + ": unterminated quote");
      dims = rhs.substr(1, close - 1);
      role = trim(std::string_view(rhs).substr(close + 1));
    }
    if (decl.name.empty()) throw DimensionError("line " + std::to_string(lineno) + ": empty name");
    decl.dimension = DimensionVector::parse(dims);
    if (role.empty() || role == "input")
      decl.role = VariableRole::input;
    else if (role == "output")
      decl.role = VariableRole::output;
    else if (role == "repeated")
      decl.role = VariableRole::repeated_candidate;
    else
      throw DimensionError("line " + std::to_string(lineno) + ": unknown role '" + role + "'");
    out.push_back(std::move(decl));
  }
  return out;
}

namespace {
const DimensionVector kLength{0, 1, 0};
const DimensionVector kVelocity{0, 1, -1};
const DimensionVector kAcceleration{0, 1, -2};
const DimensionVector kForce{1, 1, -2};
const DimensionVector kNone{};
}  // namespace

std::vector<VariableDecl> kinematic_variables() {
  return {
      {"X", kLength, VariableRole::output},
      {"Y", kLength, VariableRole::output},
      {"theta", kNone, VariableRole::output},
      {"v_i", kVelocity, VariableRole::repeated_candidate},
      {"a", kAcceleration, VariableRole::input},
      {"delta", kNone, VariableRole::input},
      {"l", kLength, VariableRole::repeated_candidate},
  };
}

std::vector<VariableDecl> dynamic_variables() {
  return {
      {"X", kLength, VariableRole::output},
      {"Y", kLength, VariableRole::output},
      {"theta", kNone, VariableRole::output},
      {"mu", kNone, VariableRole::input},
      {"v_i", kVelocity, VariableRole::repeated_candidate},
      {"g", kAcceleration, VariableRole::input},
      {"a", kAcceleration, VariableRole::input},
      {"delta", kNone, VariableRole::input},
      {"N_f", kForce, VariableRole::repeated_candidate},
      {"N_r", kForce, VariableRole::input},
      {"l", kLength, VariableRole::repeated_candidate},
  };
}

}  // namespace pitransfer
