#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdde/core.hpp"

namespace sdde {

// One candidate function theta_j over the augmented state z (2n variables).
struct BasisTerm {
   using Map = std::function<double(std::span<const double> z)>;
   // Optional domain check; returns false when the term is undefined at z.
   using Domain = std::function<bool(std::span<const double> z)>;

   enum class Kind { Monomial, Custom };

   Kind kind = Kind::Monomial;
   std::string name;
   std::vector<unsigned> exponents; // monomial only, size 2n
   Map map;                         // custom only
   Domain domain;                   // custom only, may be empty

   static BasisTerm monomial(std::vector<unsigned> exponents, std::size_t n);
   static BasisTerm custom(std::string name, Map map, Domain domain = {});

   unsigned degree() const;
   double operator()(std::span<const double> z) const;
};

std::string_view to_string(BasisTerm::Kind kind);

class BasisLibrary {
public:
   BasisLibrary(std::size_t n, unsigned degree, std::vector<BasisTerm> terms);

   std::size_t n() const noexcept { return n_; }
   std::size_t n_vars() const noexcept { return 2 * n_; }
   unsigned degree() const noexcept { return degree_; }
   std::size_t size() const noexcept { return terms_.size(); }
   const std::vector<BasisTerm>& terms() const noexcept { return terms_; }
   const BasisTerm& operator[](std::size_t j) const { return terms_.at(j); }

   std::optional<std::size_t> index_of(std::string_view name) const;
   std::vector<std::string> names() const;
   // "index,name,kind" lines, 1-based index, with a header row.
   std::string describe() const;

private:
   std::size_t n_;
   unsigned degree_;
   std::vector<BasisTerm> terms_;
};

// Name of augmented variable v (0-based): X(t), Y(t), ... then the delayed
// copies X(t-tau), ...; states beyond the second are X3(t), X4(t), ...
std::string variable_name(std::size_t v, std::size_t n);

// All monomials of total degree <= d over current and (if `delayed`) delayed
// states, in graded order: degree 0, degree 1 in variable order, then each
// higher degree in lexicographic order of nondecreasing index tuples.
BasisLibrary polynomial_library(std::size_t n, unsigned degree, bool delayed = true);

enum class Placement {
   Append, // extra terms after the existing ones
   Tensor  // existing block, then existing x extra[0], existing x extra[1], ...
};

BasisLibrary with_custom_terms(const BasisLibrary& lib, const std::vector<BasisTerm>& extra,
                               Placement placement = Placement::Append);

// ln(x_c(t) / x_c(t-tau)) for state component c; defined for positive arguments.
BasisTerm log_ratio_term(std::size_t n, std::size_t component = 0, unsigned power = 1);

// Libraries used for the scalar option-pricing model.
BasisLibrary option_drift_library();
BasisLibrary option_diffusion_library();

// Design matrix, entry (i, j) = theta_j(z_i). Rows evaluated in parallel.
RowMatrix evaluate_library(const BasisLibrary& lib, const RowMatrix& z);
RowMatrix evaluate_library(const BasisLibrary& lib, const std::vector<AugmentedSample>& samples);
void evaluate_row(const BasisLibrary& lib, std::span<const double> z, std::span<double> out,
                  std::size_t sample = 0);

namespace serial {
RowMatrix evaluate_library(const BasisLibrary& lib, const RowMatrix& z);
} // namespace serial

} // namespace sdde
