#include "polyode/witness.hpp"

#include <algorithm>

namespace polyode {

std::string class_tag_name(ClassTag t) {
    switch (t) {
        case ClassTag::ALP: return "ALP";
        case ClassTag::ATSP: return "ATSP";
        case ClassTag::AWP: return "AWP";
        case ClassTag::ARP: return "ARP";
        case ClassTag::ASP: return "ASP";
        case ClassTag::AXP: return "AXP";
        case ClassTag::AOP: return "AOP";
    }
    throw ParameterError("unknown class tag");
}

ClassTag class_tag_from_name(const std::string& s) {
    for (ClassTag t : {ClassTag::ALP, ClassTag::ATSP, ClassTag::AWP, ClassTag::ARP, ClassTag::ASP,
                       ClassTag::AXP, ClassTag::AOP})
        if (class_tag_name(t) == s) return t;
    throw ParameterError("unknown class tag '" + s + "'");
}

int FRef::out_dim() const {
    switch (kind) {
        case Kind::Constant: return static_cast<int>(constants.size());
        case Kind::Poly: return poly.size();
        case Kind::Expr: return static_cast<int>(exprs.size());
    }
    return 0;
}

std::vector<double> FRef::eval(std::span<const double> x) const {
    std::vector<double> out;
    switch (kind) {
        case Kind::Constant:
            for (const auto& c : constants) out.push_back(c.convert_to<double>());
            break;
        case Kind::Poly: {
            std::vector<double> pt(x.begin(), x.end());
            for (const auto& p : poly.components()) out.push_back(p.eval_as<double>(pt));
            break;
        }
        case Kind::Expr:
            for (const auto& e : exprs) out.push_back(eval_expr(e, x));
            break;
    }
    return out;
}

std::vector<double> DomainBox::sample(std::mt19937_64& rng) const {
    std::vector<double> x;
    x.reserve(ranges.size());
    for (const auto& [lo, hi] : ranges) {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x.push_back(lo + (hi - lo) * u);
    }
    return x;
}

double DomainBox::sup_norm() const {
    double m = 0;
    for (const auto& [lo, hi] : ranges) m = std::max({m, std::abs(lo), std::abs(hi)});
    return m;
}

namespace {

const std::map<std::string, std::map<std::string, int>>& bound_schema() {
    static const std::map<std::string, std::map<std::string, int>> schema = {
        {"ALP", {{"Omega", 2}}},
        {"ATSP", {{"Omega", 2}, {"Upsilon", 2}}},
        {"AWP", {{"Omega", 2}, {"Upsilon", 3}}},
        {"ARP", {{"Omega", 2}, {"Upsilon", 3}, {"Theta", 2}}},
        {"ASP", {{"Omega", 2}, {"Upsilon", 4}, {"Theta", 2}}},
        {"AXP", {{"Omega", 2}, {"Upsilon", 3}, {"Theta", 2}, {"Lambda", 2}}},
        {"AOP", {{"Omega", 2}, {"Upsilon", 2}, {"Lambda", 2}}},
    };
    return schema;
}

} // namespace

void ComputabilityWitness::validate() const {
    pivp.validate();
    const auto& need = bound_schema().at(class_tag_name(tag));
    for (const auto& [name, arity] : need) {
        auto it = bounds.find(name);
        if (it == bounds.end())
            throw ParameterError("witness[" + class_tag_name(tag) + "] is missing bound " + name);
        if (it->second.arity() != arity)
            throw DimensionError("witness bound " + name + " must have arity " +
                                 std::to_string(arity));
    }
    if (out_dim <= 0 || out_dim > static_cast<int>(pivp.outputs.size()))
        throw DimensionError("witness out_dim inconsistent with pivp outputs");
    if (f_ref.out_dim() != out_dim) throw DimensionError("witness f_ref output dim mismatch");
    for (const auto& e : generable_rhs)
        if (e->contains_exp)
            throw UnsupportedError("witness right-hand side uses an unbounded primitive");
}

const MultiPoly& ComputabilityWitness::bound(const std::string& name) const {
    auto it = bounds.find(name);
    if (it == bounds.end()) throw ParameterError("witness has no bound " + name);
    return it->second;
}

double ComputabilityWitness::eval_bound(const std::string& name,
                                        std::span<const double> args) const {
    std::vector<double> pt(args.begin(), args.end());
    return bound(name).eval_as<double>(pt);
}

} // namespace polyode
