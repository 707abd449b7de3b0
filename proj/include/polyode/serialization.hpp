#pragma once

#include "polyode/bounds.hpp"
#include "polyode/expr.hpp"
#include "polyode/pivp.hpp"
#include "polyode/solver.hpp"
#include "polyode/witness.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace polyode {

using Json = nlohmann::ordered_json;

Json rational_to_json(const Rational& q);
Rational rational_from_json(const Json& j);

/// {arity, terms: [{exp: [...], num, den}]}
Json poly_to_json(const MultiPoly& p);
MultiPoly poly_from_json(const Json& j);

Json polyvec_to_json(const PolyVector& v);
PolyVector polyvec_from_json(const Json& j);

Json expr_to_json(const ExprPtr& e);
ExprPtr expr_from_json(const Json& j);

Json pivp_to_json(const Pivp& p);
Pivp pivp_from_json(const Json& j);

Json witness_to_json(const ComputabilityWitness& w);
ComputabilityWitness witness_from_json(const Json& j);

Json report_to_json(const BoundReport& r);

/// Trace export. CSV columns: t, y1..yd, deriv_norm, length, space, budget.
/// Doubles print with max_digits10 so identical runs are bit-identical.
void trace_to_csv(const Trace& t, std::ostream& out);
Json trace_to_json(const Trace& t);

void save_json(const Json& j, const std::string& path);
Json load_json(const std::string& path);

} // namespace polyode
