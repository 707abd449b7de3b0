#pragma once

#include "polyode/errors.hpp"
#include "polyode/rational.hpp"
#include "polyode/real.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace polyode {

using ExponentVec = std::vector<uint32_t>;

/// One term of a sparse multivariate polynomial. The owning polynomial
/// guarantees coeff != 0 and exponents.size() == arity.
struct Monomial {
    ExponentVec exponents;
    Rational coeff;

    uint64_t total_degree() const {
        uint64_t d = 0;
        for (auto e : exponents) d += e;
        return d;
    }
};

/// Graded lexicographic order, descending: higher total degree first,
/// ties broken lexicographically. Fixed so that serialized polynomials
/// are canonical and diffable.
struct GradedLexDesc {
    bool operator()(const ExponentVec& a, const ExponentVec& b) const;
};

/// Sparse multivariate polynomial with exact rational coefficients.
/// The zero polynomial is the empty term map; no term stores a zero
/// coefficient. Immutable in spirit: mutating helpers are private to
/// construction paths, all public operations return new values.
class MultiPoly {
public:
    using TermMap = std::map<ExponentVec, Rational, GradedLexDesc>;

    MultiPoly() : arity_(0) {}
    explicit MultiPoly(int arity) : arity_(arity) {}

    static MultiPoly zero(int arity) { return MultiPoly(arity); }
    static MultiPoly constant(int arity, const Rational& c);
    static MultiPoly variable(int arity, int index);
    static MultiPoly monomial(int arity, const ExponentVec& exps, const Rational& c);

    int arity() const { return arity_; }
    bool is_zero() const { return terms_.empty(); }
    size_t term_count() const { return terms_.size(); }
    const TermMap& terms() const { return terms_; }

    /// Max total degree; 0 for the zero polynomial.
    uint64_t degree() const;
    /// Sum of absolute values of all coefficients (the paper's sigma).
    Rational sigma() const;

    /// True iff the polynomial is a constant (or zero).
    bool is_constant() const;
    Rational constant_value() const;

    void add_term(const ExponentVec& exps, const Rational& c);

    MultiPoly operator+(const MultiPoly& rhs) const;
    MultiPoly operator-(const MultiPoly& rhs) const;
    MultiPoly operator*(const MultiPoly& rhs) const;
    MultiPoly operator-() const;
    MultiPoly scaled(const Rational& c) const;
    bool operator==(const MultiPoly& rhs) const;

    MultiPoly pow(uint32_t e) const;

    /// Exact formal partial derivative with respect to variable `var`.
    MultiPoly partial_derivative(int var) const;

    /// Substitutes args[i] for variable i. All args must share one arity,
    /// which becomes the arity of the result.
    MultiPoly compose(std::span<const MultiPoly> args) const;

    /// Re-embeds into a wider variable space: variable i becomes
    /// variable mapping[i]. new_arity must cover all mapped indices.
    MultiPoly remap(int new_arity, std::span<const int> mapping) const;

    /// Numeric evaluation. The templated form evaluates in the scalar's
    /// native precision and is used by the solver hot path.
    template <typename Scalar>
    Scalar eval_as(std::span<const Scalar> point) const;

    /// Evaluation at a requested precision (bits of mantissa, >= 53).
    /// Deterministic for a fixed precision.
    Real eval(std::span<const Real> point, unsigned precision_bits) const;

    /// Exact evaluation at a rational point (test oracle support).
    Rational eval_exact(std::span<const Rational> point) const;

    std::string to_string(const std::string& var_prefix = "x") const;

private:
    void check_arity(const MultiPoly& other) const;

    int arity_;
    TermMap terms_;
};

/// Ordered vector of polynomials sharing one arity; the p of y' = p(y).
class PolyVector {
public:
    PolyVector() : arity_(0) {}
    explicit PolyVector(int arity) : arity_(arity) {}
    PolyVector(int arity, std::vector<MultiPoly> components);

    static PolyVector zero(int arity, int count);

    int arity() const { return arity_; }
    int size() const { return static_cast<int>(components_.size()); }
    const MultiPoly& operator[](int i) const { return components_[i]; }
    const std::vector<MultiPoly>& components() const { return components_; }

    void push_back(MultiPoly p);

    template <typename Scalar>
    std::vector<Scalar> eval_as(std::span<const Scalar> point) const {
        std::vector<Scalar> out;
        out.reserve(components_.size());
        for (const auto& p : components_) out.push_back(p.eval_as<Scalar>(point));
        return out;
    }

    PolyVector compose(std::span<const MultiPoly> args) const;
    PolyVector remap(int new_arity, std::span<const int> mapping) const;

    bool operator==(const PolyVector& rhs) const;

private:
    int arity_;
    std::vector<MultiPoly> components_;
};

/// (k, sigma): max total degree over all components (0 for zero) and the
/// sum of absolute coefficient values, as used by the parameter-dependency
/// bound.
struct DegreeSigma {
    uint64_t k = 0;
    Rational sigma = 0;
};

DegreeSigma degree_and_sigma(const MultiPoly& p);
DegreeSigma degree_and_sigma(const PolyVector& p);

/// Canonical text syntax, e.g. "3*x1^2*x2 - 1/2*x2". Round-trips with
/// MultiPoly::to_string. `arity` <= 0 infers the arity from the largest
/// variable index used.
MultiPoly parse_poly(const std::string& text, int arity = -1);

} // namespace polyode
