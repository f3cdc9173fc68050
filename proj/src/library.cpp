#include "sdde/library.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "parallel.hpp"

namespace sdde {

std::string variable_name(std::size_t v, std::size_t n)
{
   const auto c = v % n;
   std::string base;
   if (n == 1) {
      base = "X";
   } else if (n == 2) {
      base = c == 0 ? "X" : "Y";
   } else {
      base = fmt::format("X{}", c + 1);
   }
   return v < n ? base + "(t)" : base + "(t-tau)";
}

namespace {

std::string monomial_name(const std::vector<unsigned>& exponents, std::size_t n)
{
   std::string name;
   for (std::size_t v = 0; v < exponents.size(); ++v) {
      if (exponents[v] == 0) continue;
      name += variable_name(v, n);
      if (exponents[v] > 1) name += fmt::format("^{}", exponents[v]);
   }
   return name.empty() ? "1" : name;
}

// Nondecreasing index tuples of length k over [0, vars), in lexicographic order.
void tuples(std::size_t vars, unsigned k, std::size_t start, std::vector<std::size_t>& cur,
            std::vector<std::vector<std::size_t>>& out)
{
   if (cur.size() == k) {
      out.push_back(cur);
      return;
   }
   for (std::size_t v = start; v < vars; ++v) {
      cur.push_back(v);
      tuples(vars, k, v, cur, out);
      cur.pop_back();
   }
}

} // namespace

std::string_view to_string(BasisTerm::Kind kind)
{
   return kind == BasisTerm::Kind::Monomial ? "monomial" : "custom";
}

BasisTerm BasisTerm::monomial(std::vector<unsigned> exponents, std::size_t n)
{
   if (exponents.size() != 2 * n) {
      throw ArgumentError(fmt::format("monomial: expected {} exponents, got {}", 2 * n, exponents.size()));
   }
   BasisTerm t;
   t.kind = Kind::Monomial;
   t.name = monomial_name(exponents, n);
   t.exponents = std::move(exponents);
   return t;
}

BasisTerm BasisTerm::custom(std::string name, Map map, Domain domain)
{
   if (name.empty() || !map) {
      throw ArgumentError("custom term needs a name and a map");
   }
   BasisTerm t;
   t.kind = Kind::Custom;
   t.name = std::move(name);
   t.map = std::move(map);
   t.domain = std::move(domain);
   return t;
}

unsigned BasisTerm::degree() const
{
   return std::accumulate(exponents.begin(), exponents.end(), 0u);
}

double BasisTerm::operator()(std::span<const double> z) const
{
   if (kind == Kind::Custom) {
      return map(z);
   }
   double v = 1.0;
   for (std::size_t i = 0; i < exponents.size(); ++i) {
      for (unsigned p = 0; p < exponents[i]; ++p) v *= z[i];
   }
   return v;
}

BasisLibrary::BasisLibrary(std::size_t n, unsigned degree, std::vector<BasisTerm> terms)
   : n_(n), degree_(degree), terms_(std::move(terms))
{
   if (n_ < 1) {
      throw ArgumentError("BasisLibrary: n must be at least 1");
   }
   std::set<std::string> seen;
   for (const auto& t : terms_) {
      if (!seen.insert(t.name).second) {
         throw ArgumentError(fmt::format("BasisLibrary: duplicate term name '{}'", t.name));
      }
      if (t.kind == BasisTerm::Kind::Monomial && t.exponents.size() != 2 * n_) {
         throw ArgumentError(fmt::format("BasisLibrary: term '{}' has the wrong variable count", t.name));
      }
   }
}

std::optional<std::size_t> BasisLibrary::index_of(std::string_view name) const
{
   for (std::size_t j = 0; j < terms_.size(); ++j) {
      if (terms_[j].name == name) return j;
   }
   return std::nullopt;
}

std::vector<std::string> BasisLibrary::names() const
{
   std::vector<std::string> out;
   out.reserve(terms_.size());
   for (const auto& t : terms_) out.push_back(t.name);
   return out;
}

std::string BasisLibrary::describe() const
{
   std::ostringstream os;
   os << "index,name,kind\n";
   for (std::size_t j = 0; j < terms_.size(); ++j) {
      os << j + 1 << ',' << terms_[j].name << ',' << to_string(terms_[j].kind) << '\n';
   }
   return os.str();
}

BasisLibrary polynomial_library(std::size_t n, unsigned degree, bool delayed)
{
   if (n < 1) {
      throw ArgumentError("polynomial_library: n must be at least 1");
   }
   const auto vars = delayed ? 2 * n : n;
   std::vector<BasisTerm> terms;
   for (unsigned k = 0; k <= degree; ++k) {
      std::vector<std::vector<std::size_t>> all;
      std::vector<std::size_t> cur;
      tuples(vars, k, 0, cur, all);
      for (const auto& tuple : all) {
         std::vector<unsigned> e(2 * n, 0);
         for (auto v : tuple) ++e[v];
         terms.push_back(BasisTerm::monomial(std::move(e), n));
      }
   }
   return BasisLibrary(n, degree, std::move(terms));
}

BasisLibrary with_custom_terms(const BasisLibrary& lib, const std::vector<BasisTerm>& extra, Placement placement)
{
   std::vector<BasisTerm> terms = lib.terms();
   if (placement == Placement::Append) {
      terms.insert(terms.end(), extra.begin(), extra.end());
      return BasisLibrary(lib.n(), lib.degree(), std::move(terms));
   }
   for (const auto& e : extra) {
      for (const auto& base : lib.terms()) {
         if (base.kind == BasisTerm::Kind::Monomial && base.degree() == 0) {
            terms.push_back(e);
            continue;
         }
         BasisTerm t;
         t.kind = BasisTerm::Kind::Custom;
         t.name = base.name + "*" + e.name;
         t.map = [base, e](std::span<const double> z) { return base(z) * e(z); };
         if (base.domain || e.domain) {
            t.domain = [base, e](std::span<const double> z) {
               return (!base.domain || base.domain(z)) && (!e.domain || e.domain(z));
            };
         }
         terms.push_back(std::move(t));
      }
   }
   return BasisLibrary(lib.n(), lib.degree(), std::move(terms));
}

BasisTerm log_ratio_term(std::size_t n, std::size_t component, unsigned power)
{
   if (component >= n || power < 1) {
      throw ArgumentError("log_ratio_term: component out of range or zero power");
   }
   auto name = fmt::format("ln({}/{})", variable_name(component, n), variable_name(component + n, n));
   if (power > 1) name += fmt::format("^{}", power);
   const auto a = component;
   const auto b = component + n;
   return BasisTerm::custom(
      std::move(name),
      [a, b, power](std::span<const double> z) {
         const double l = std::log(z[a] / z[b]);
         double v = 1.0;
         for (unsigned p = 0; p < power; ++p) v *= l;
         return v;
      },
      [a, b](std::span<const double> z) { return z[a] > 0.0 && z[b] > 0.0; });
}

BasisLibrary option_drift_library()
{
   return with_custom_terms(polynomial_library(1, 1), {log_ratio_term(1)}, Placement::Append);
}

BasisLibrary option_diffusion_library()
{
   return with_custom_terms(polynomial_library(1, 4), {log_ratio_term(1, 0, 1), log_ratio_term(1, 0, 2)},
                            Placement::Tensor);
}

void evaluate_row(const BasisLibrary& lib, std::span<const double> z, std::span<double> out, std::size_t sample)
{
   if (z.size() != lib.n_vars()) {
      throw ArgumentError(fmt::format("evaluate_library: sample has {} variables, library expects {}", z.size(),
                                      lib.n_vars()));
   }
   const auto& terms = lib.terms();
   for (std::size_t j = 0; j < terms.size(); ++j) {
      const auto& t = terms[j];
      if (t.domain && !t.domain(z)) {
         throw EvaluationError(fmt::format("term '{}' undefined at sample {}", t.name, sample), sample, t.name);
      }
      const double v = t(z);
      if (!std::isfinite(v)) {
         throw EvaluationError(fmt::format("term '{}' is not finite at sample {}", t.name, sample), sample, t.name);
      }
      out[j] = v;
   }
}

RowMatrix evaluate_library(const BasisLibrary& lib, const RowMatrix& z)
{
   RowMatrix out(z.rows(), static_cast<Eigen::Index>(lib.size()));
   detail::parallel_for(static_cast<std::size_t>(z.rows()), [&](std::size_t i) {
      const auto r = static_cast<Eigen::Index>(i);
      evaluate_row(lib, row_span(z, r), row_span(out, r), i);
   });
   return out;
}

RowMatrix evaluate_library(const BasisLibrary& lib, const std::vector<AugmentedSample>& samples)
{
   RowMatrix z(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(lib.n_vars()));
   for (std::size_t i = 0; i < samples.size(); ++i) {
      if (static_cast<std::size_t>(samples[i].z.size()) != lib.n_vars()) {
         throw ArgumentError(fmt::format("evaluate_library: sample {} has dimension {}, library expects {}", i,
                                         samples[i].z.size(), lib.n_vars()));
      }
      z.row(static_cast<Eigen::Index>(i)) = samples[i].z.transpose();
   }
   return evaluate_library(lib, z);
}

namespace serial {

RowMatrix evaluate_library(const BasisLibrary& lib, const RowMatrix& z)
{
   RowMatrix out(z.rows(), static_cast<Eigen::Index>(lib.size()));
   for (Eigen::Index r = 0; r < z.rows(); ++r) {
      evaluate_row(lib, row_span(z, r), row_span(out, r), static_cast<std::size_t>(r));
   }
   return out;
}

} // namespace serial

} // namespace sdde
