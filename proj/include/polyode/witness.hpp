#pragma once

#include "polyode/expr.hpp"
#include "polyode/pivp.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace polyode {

enum class ClassTag { ALP, ATSP, AWP, ARP, ASP, AXP, AOP };

std::string class_tag_name(ClassTag t);
ClassTag class_tag_from_name(const std::string& s);

/// Reference evaluator for the computed function f (testing only).
struct FRef {
    enum class Kind { Constant, Poly, Expr };
    Kind kind = Kind::Constant;
    std::vector<Rational> constants;
    PolyVector poly;             // f(x) = poly(x)
    std::vector<ExprPtr> exprs;  // one scalar expression per output

    int out_dim() const;
    std::vector<double> eval(std::span<const double> x) const;
};

/// Axis-aligned box the witness's argument is sampled from.
struct DomainBox {
    std::vector<std::pair<double, double>> ranges;

    int dim() const { return static_cast<int>(ranges.size()); }
    std::vector<double> sample(std::mt19937_64& rng) const;
    double sup_norm() const;
};

/// A PIVP with the polynomial bounds and class tag of one of the paper's
/// computability notions, the unit the pipeline transformers act on.
///
/// Bound arities by class (alpha = ||x||, mu = precision, t = time,
/// c = error budget):
///   ALP  Omega(alpha,mu)
///   ATSP Omega(alpha,mu), Upsilon(alpha,t)
///   AWP  Omega(alpha,mu), Upsilon(alpha,mu,t)
///   ARP  Omega(alpha,mu), Upsilon(alpha,mu,t), Theta(alpha,mu)
///   ASP  Omega(alpha,mu), Upsilon(alpha,mu,c,t), Theta(alpha,mu)
///   AXP  Omega(alpha,mu) [constant], Upsilon(alpha,mu,c), Theta(alpha,mu), Lambda(alpha,mu)
///   AOP  Omega(alpha,mu), Upsilon(alpha,t), Lambda(alpha,mu)
///
/// For the robust classes (ARP and up) the defining right-hand side is
/// generable rather than polynomial; generable_rhs/generable_init carry
/// that form (one expression per semantic state, arguments = states then
/// external inputs) while pivp stores its lowered polynomial realization.
struct ComputabilityWitness {
    Pivp pivp;
    ClassTag tag = ClassTag::ATSP;
    std::map<std::string, MultiPoly> bounds;
    FRef f_ref;
    DomainBox domain;
    int out_dim = 1;

    std::vector<ExprPtr> generable_rhs;
    std::vector<ExprPtr> generable_init;
    int semantic_dim = 0; // states of the generable form (0: pivp.dim)

    void validate() const;
    const MultiPoly& bound(const std::string& name) const;
    double eval_bound(const std::string& name, std::span<const double> args) const;
};

} // namespace polyode
