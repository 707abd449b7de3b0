#include "polyode/serialization.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace polyode {

namespace {

Json integer_to_json(const Integer& n) {
    if (n >= std::numeric_limits<int64_t>::min() && n <= std::numeric_limits<int64_t>::max())
        return n.convert_to<int64_t>();
    return n.str(); // big values travel as strings
}

Integer integer_from_json(const Json& j) {
    if (j.is_number_integer()) return Integer(j.get<int64_t>());
    if (j.is_string()) return Integer(j.get<std::string>());
    throw ParameterError("expected integer or string in JSON number");
}

} // namespace

Json rational_to_json(const Rational& q) {
    Json j;
    j["num"] = integer_to_json(boost::multiprecision::numerator(q));
    j["den"] = integer_to_json(boost::multiprecision::denominator(q));
    return j;
}

Rational rational_from_json(const Json& j) {
    return Rational(integer_from_json(j.at("num")), integer_from_json(j.at("den")));
}

Json poly_to_json(const MultiPoly& p) {
    Json j;
    j["arity"] = p.arity();
    Json terms = Json::array();
    for (const auto& [e, c] : p.terms()) {
        Json t;
        t["exp"] = e;
        t["num"] = integer_to_json(boost::multiprecision::numerator(c));
        t["den"] = integer_to_json(boost::multiprecision::denominator(c));
        terms.push_back(std::move(t));
    }
    j["terms"] = std::move(terms);
    return j;
}

MultiPoly poly_from_json(const Json& j) {
    MultiPoly p(j.at("arity").get<int>());
    for (const auto& t : j.at("terms")) {
        ExponentVec e = t.at("exp").get<ExponentVec>();
        Rational c(integer_from_json(t.at("num")), integer_from_json(t.at("den")));
        p.add_term(e, c);
    }
    return p;
}

Json polyvec_to_json(const PolyVector& v) {
    Json j;
    j["arity"] = v.arity();
    Json comps = Json::array();
    for (const auto& p : v.components()) comps.push_back(poly_to_json(p));
    j["components"] = std::move(comps);
    return j;
}

PolyVector polyvec_from_json(const Json& j) {
    PolyVector v(j.at("arity").get<int>());
    for (const auto& p : j.at("components")) v.push_back(poly_from_json(p));
    return v;
}

namespace {

const char* prim_name(PrimKind k) {
    switch (k) {
        case PrimKind::Sin: return "sin";
        case PrimKind::Cos: return "cos";
        case PrimKind::Tanh: return "tanh";
        case PrimKind::Exp: return "exp";
        case PrimKind::Norm: return "norm";
        case PrimKind::Mx: return "mx";
        case PrimKind::Lxh: return "lxh";
        case PrimKind::Hxl: return "hxl";
        case PrimKind::Log1pSq: return "log1p_sq";
        case PrimKind::Inv: return "inv";
        case PrimKind::OdeSolution: return "ode";
    }
    return "?";
}

PrimKind prim_from_name(const std::string& s) {
    for (PrimKind k : {PrimKind::Sin, PrimKind::Cos, PrimKind::Tanh, PrimKind::Exp, PrimKind::Norm,
                       PrimKind::Mx, PrimKind::Lxh, PrimKind::Hxl, PrimKind::Log1pSq, PrimKind::Inv,
                       PrimKind::OdeSolution})
        if (prim_name(k) == s) return k;
    throw ParameterError("unknown primitive '" + s + "'");
}

} // namespace

Json expr_to_json(const ExprPtr& e) {
    Json j;
    j["arity"] = e->arity;
    switch (e->kind) {
        case ExprKind::Var:
            j["kind"] = "var";
            j["index"] = e->var_index;
            return j;
        case ExprKind::Time:
            j["kind"] = "time";
            return j;
        case ExprKind::Const:
            j["kind"] = "const";
            j["value"] = rational_to_json(e->value);
            return j;
        case ExprKind::Add:
            j["kind"] = "add";
            break;
        case ExprKind::Sub:
            j["kind"] = "sub";
            break;
        case ExprKind::Mul:
            j["kind"] = "mul";
            break;
        case ExprKind::Poly:
            j["kind"] = "poly";
            j["poly"] = poly_to_json(e->poly);
            break;
        case ExprKind::Prim:
            j["kind"] = "prim";
            j["prim"] = prim_name(e->prim);
            if (e->prim == PrimKind::Norm || e->prim == PrimKind::Mx)
                j["delta"] = rational_to_json(e->params.delta);
            if (e->prim == PrimKind::Lxh || e->prim == PrimKind::Hxl) {
                j["a"] = rational_to_json(e->params.interval.a);
                j["b"] = rational_to_json(e->params.interval.b);
            }
            if (e->prim == PrimKind::OdeSolution) {
                j["ode"] = pivp_to_json(*e->params.ode);
                j["output"] = e->params.ode_output;
                j["t0"] = rational_to_json(e->params.ode_t0);
            }
            break;
    }
    Json ch = Json::array();
    for (const auto& c : e->children) ch.push_back(expr_to_json(c));
    j["children"] = std::move(ch);
    return j;
}

ExprPtr expr_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    int arity = j.at("arity").get<int>();
    if (kind == "var") return make_var(arity, j.at("index").get<int>());
    if (kind == "time") return make_time(arity);
    if (kind == "const") return make_const(arity, rational_from_json(j.at("value")));
    std::vector<ExprPtr> children;
    for (const auto& c : j.at("children")) children.push_back(expr_from_json(c));
    if (kind == "add") return make_add(children[0], children[1]);
    if (kind == "sub") return make_sub(children[0], children[1]);
    if (kind == "mul") return make_mul(children[0], children[1]);
    if (kind == "poly") return make_poly(poly_from_json(j.at("poly")), std::move(children));
    if (kind == "prim") {
        PrimKind pk = prim_from_name(j.at("prim").get<std::string>());
        PrimParams params;
        if (pk == PrimKind::Norm || pk == PrimKind::Mx)
            params.delta = rational_from_json(j.at("delta"));
        if (pk == PrimKind::Lxh || pk == PrimKind::Hxl)
            params.interval = {rational_from_json(j.at("a")), rational_from_json(j.at("b"))};
        if (pk == PrimKind::OdeSolution) {
            params.ode = std::make_shared<const Pivp>(pivp_from_json(j.at("ode")));
            params.ode_output = j.at("output").get<int>();
            params.ode_t0 = rational_from_json(j.at("t0"));
        }
        return build_primitive(pk, std::move(params), std::move(children), true);
    }
    throw ParameterError("unknown expression kind '" + kind + "'");
}

Json pivp_to_json(const Pivp& p) {
    Json j;
    j["dim"] = p.dim;
    j["input_arity"] = p.input_arity;
    j["input_derivatives"] = p.input_derivatives;
    j["rhs"] = polyvec_to_json(p.rhs);
    j["init"] = polyvec_to_json(p.init);
    j["outputs"] = p.outputs;
    Json aux = Json::array();
    for (const auto& a : p.aux_init) {
        Json e;
        e["state"] = a.state;
        e["expr"] = expr_to_json(a.expr);
        aux.push_back(std::move(e));
    }
    j["aux_init"] = std::move(aux);
    return j;
}

Pivp pivp_from_json(const Json& j) {
    Pivp p;
    p.dim = j.at("dim").get<int>();
    p.input_arity = j.at("input_arity").get<int>();
    p.input_derivatives = j.at("input_derivatives").get<bool>();
    p.rhs = polyvec_from_json(j.at("rhs"));
    p.init = polyvec_from_json(j.at("init"));
    p.outputs = j.at("outputs").get<std::vector<int>>();
    for (const auto& a : j.at("aux_init"))
        p.aux_init.push_back({a.at("state").get<int>(), expr_from_json(a.at("expr"))});
    p.validate();
    return p;
}

Json witness_to_json(const ComputabilityWitness& w) {
    Json j;
    j["schema"] = "polyode.witness/1";
    j["class"] = class_tag_name(w.tag);
    j["pivp"] = pivp_to_json(w.pivp);
    Json b;
    for (const auto& [name, poly] : w.bounds) b[name] = poly_to_json(poly);
    j["bounds"] = std::move(b);
    Json f;
    switch (w.f_ref.kind) {
        case FRef::Kind::Constant: {
            f["kind"] = "const";
            Json vals = Json::array();
            for (const auto& c : w.f_ref.constants) vals.push_back(rational_to_json(c));
            f["values"] = std::move(vals);
            break;
        }
        case FRef::Kind::Poly:
            f["kind"] = "poly";
            f["poly"] = polyvec_to_json(w.f_ref.poly);
            break;
        case FRef::Kind::Expr: {
            f["kind"] = "expr";
            Json es = Json::array();
            for (const auto& e : w.f_ref.exprs) es.push_back(expr_to_json(e));
            f["exprs"] = std::move(es);
            break;
        }
    }
    j["f_ref"] = std::move(f);
    Json dom = Json::array();
    for (const auto& [lo, hi] : w.domain.ranges) dom.push_back(Json::array({lo, hi}));
    j["domain"] = std::move(dom);
    j["out_dim"] = w.out_dim;
    if (!w.generable_rhs.empty()) {
        Json g = Json::array();
        for (const auto& e : w.generable_rhs) g.push_back(expr_to_json(e));
        j["generable_rhs"] = std::move(g);
        Json gi = Json::array();
        for (const auto& e : w.generable_init) gi.push_back(expr_to_json(e));
        j["generable_init"] = std::move(gi);
        j["semantic_dim"] = w.semantic_dim;
    }
    return j;
}

ComputabilityWitness witness_from_json(const Json& j) {
    ComputabilityWitness w;
    w.tag = class_tag_from_name(j.at("class").get<std::string>());
    w.pivp = pivp_from_json(j.at("pivp"));
    for (const auto& [name, poly] : j.at("bounds").items()) w.bounds[name] = poly_from_json(poly);
    const Json& f = j.at("f_ref");
    const std::string fk = f.at("kind").get<std::string>();
    if (fk == "const") {
        w.f_ref.kind = FRef::Kind::Constant;
        for (const auto& v : f.at("values")) w.f_ref.constants.push_back(rational_from_json(v));
    } else if (fk == "poly") {
        w.f_ref.kind = FRef::Kind::Poly;
        w.f_ref.poly = polyvec_from_json(f.at("poly"));
    } else if (fk == "expr") {
        w.f_ref.kind = FRef::Kind::Expr;
        for (const auto& e : f.at("exprs")) w.f_ref.exprs.push_back(expr_from_json(e));
    } else {
        throw ParameterError("unknown f_ref kind '" + fk + "'");
    }
    for (const auto& r : j.at("domain"))
        w.domain.ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
    w.out_dim = j.at("out_dim").get<int>();
    if (j.contains("generable_rhs")) {
        for (const auto& e : j.at("generable_rhs")) w.generable_rhs.push_back(expr_from_json(e));
        for (const auto& e : j.at("generable_init")) w.generable_init.push_back(expr_from_json(e));
        w.semantic_dim = j.at("semantic_dim").get<int>();
    }
    w.validate();
    return w;
}

Json report_to_json(const BoundReport& r) {
    Json j;
    j["schema"] = "polyode.report/1";
    j["kind"] = r.kind;
    j["applicable"] = r.applicable;
    j["pass"] = r.pass;
    j["min_margin"] = r.min_margin;
    if (!r.detail.empty()) j["detail"] = r.detail;
    Json bs = Json::array();
    for (const auto& [t, v] : r.bound_samples) bs.push_back(Json::array({t, v}));
    j["bound_samples"] = std::move(bs);
    Json ds = Json::array();
    for (const auto& [t, v] : r.deviation_samples) ds.push_back(Json::array({t, v}));
    j["deviation_samples"] = std::move(ds);
    return j;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void trace_to_csv(const Trace& t, std::ostream& out) {
    out << "t";
    for (int i = 0; i < t.dim; ++i) out << ",y" << (i + 1);
    out << ",deriv_norm,length,space,budget\n";
    for (const auto& s : t.samples) {
        out << fmt_double(s.t);
        for (double v : s.y) out << "," << fmt_double(v);
        out << "," << fmt_double(s.deriv_norm) << "," << fmt_double(s.length) << ","
            << fmt_double(s.space) << "," << fmt_double(s.budget) << "\n";
    }
}

Json trace_to_json(const Trace& t) {
    Json j;
    j["schema"] = "polyode.trace/1";
    j["dim"] = t.dim;
    j["status"] = t.status == TraceStatus::ok ? "ok"
                  : t.status == TraceStatus::blowup ? "blowup"
                                                    : "stalled";
    if (!t.message.empty()) j["message"] = t.message;
    Json rows = Json::array();
    for (const auto& s : t.samples) {
        Json row;
        row["t"] = s.t;
        row["y"] = s.y;
        row["deriv_norm"] = s.deriv_norm;
        row["length"] = s.length;
        row["space"] = s.space;
        row["budget"] = s.budget;
        rows.push_back(std::move(row));
    }
    j["samples"] = std::move(rows);
    return j;
}

void save_json(const Json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    Json j;
    in >> j;
    return j;
}

} // namespace polyode
