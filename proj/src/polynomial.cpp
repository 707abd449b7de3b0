#include "polyode/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace polyode {

bool GradedLexDesc::operator()(const ExponentVec& a, const ExponentVec& b) const {
    uint64_t da = 0, db = 0;
    for (auto e : a) da += e;
    for (auto e : b) db += e;
    if (da != db) return da > db;
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

MultiPoly MultiPoly::constant(int arity, const Rational& c) {
    MultiPoly p(arity);
    if (c != 0) p.terms_.emplace(ExponentVec(arity, 0), c);
    return p;
}

MultiPoly MultiPoly::variable(int arity, int index) {
    if (index < 0 || index >= arity)
        throw DimensionError("variable index " + std::to_string(index) + " out of range for arity " +
                             std::to_string(arity));
    ExponentVec e(arity, 0);
    e[index] = 1;
    MultiPoly p(arity);
    p.terms_.emplace(std::move(e), Rational(1));
    return p;
}

MultiPoly MultiPoly::monomial(int arity, const ExponentVec& exps, const Rational& c) {
    if (static_cast<int>(exps.size()) != arity)
        throw DimensionError("monomial exponent vector length != arity");
    MultiPoly p(arity);
    if (c != 0) p.terms_.emplace(exps, c);
    return p;
}

uint64_t MultiPoly::degree() const {
    uint64_t d = 0;
    for (const auto& [e, c] : terms_) {
        uint64_t td = 0;
        for (auto x : e) td += x;
        d = std::max(d, td);
    }
    return d;
}

Rational MultiPoly::sigma() const {
    Rational s = 0;
    for (const auto& [e, c] : terms_) s += (c < 0 ? Rational(-c) : c);
    return s;
}

bool MultiPoly::is_constant() const {
    if (terms_.empty()) return true;
    if (terms_.size() > 1) return false;
    const auto& e = terms_.begin()->first;
    return std::all_of(e.begin(), e.end(), [](uint32_t x) { return x == 0; });
}

Rational MultiPoly::constant_value() const {
    if (terms_.empty()) return 0;
    if (!is_constant()) throw ParameterError("polynomial is not constant");
    return terms_.begin()->second;
}

void MultiPoly::add_term(const ExponentVec& exps, const Rational& c) {
    if (static_cast<int>(exps.size()) != arity_)
        throw DimensionError("term exponent vector length != arity");
    if (c == 0) return;
    auto it = terms_.find(exps);
    if (it == terms_.end()) {
        terms_.emplace(exps, c);
    } else {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

void MultiPoly::check_arity(const MultiPoly& other) const {
    if (arity_ != other.arity_)
        throw DimensionError("polynomial arity mismatch: " + std::to_string(arity_) + " vs " +
                             std::to_string(other.arity_));
}

MultiPoly MultiPoly::operator+(const MultiPoly& rhs) const {
    check_arity(rhs);
    MultiPoly out = *this;
    for (const auto& [e, c] : rhs.terms_) out.add_term(e, c);
    return out;
}

MultiPoly MultiPoly::operator-(const MultiPoly& rhs) const {
    check_arity(rhs);
    MultiPoly out = *this;
    for (const auto& [e, c] : rhs.terms_) out.add_term(e, -c);
    return out;
}

MultiPoly MultiPoly::operator-() const {
    MultiPoly out(arity_);
    for (const auto& [e, c] : terms_) out.terms_.emplace(e, -c);
    return out;
}

MultiPoly MultiPoly::scaled(const Rational& c) const {
    MultiPoly out(arity_);
    if (c == 0) return out;
    for (const auto& [e, k] : terms_) out.terms_.emplace(e, k * c);
    return out;
}

MultiPoly MultiPoly::operator*(const MultiPoly& rhs) const {
    check_arity(rhs);
    MultiPoly out(arity_);
    for (const auto& [ea, ca] : terms_) {
        for (const auto& [eb, cb] : rhs.terms_) {
            ExponentVec e(arity_);
            for (int i = 0; i < arity_; ++i) e[i] = ea[i] + eb[i];
            out.add_term(e, ca * cb);
        }
    }
    return out;
}

bool MultiPoly::operator==(const MultiPoly& rhs) const {
    return arity_ == rhs.arity_ && terms_ == rhs.terms_;
}

MultiPoly MultiPoly::pow(uint32_t e) const {
    MultiPoly acc = MultiPoly::constant(arity_, 1);
    MultiPoly base = *this;
    while (e > 0) {
        if (e & 1u) acc = acc * base;
        base = base * base;
        e >>= 1u;
    }
    return acc;
}

MultiPoly MultiPoly::partial_derivative(int var) const {
    if (var < 0 || var >= arity_)
        throw DimensionError("derivative index " + std::to_string(var) + " out of range");
    MultiPoly out(arity_);
    for (const auto& [e, c] : terms_) {
        if (e[var] == 0) continue;
        ExponentVec d = e;
        d[var] -= 1;
        out.add_term(d, c * Rational(e[var]));
    }
    return out;
}

MultiPoly MultiPoly::compose(std::span<const MultiPoly> args) const {
    if (static_cast<int>(args.size()) != arity_)
        throw DimensionError("compose: expected " + std::to_string(arity_) + " arguments, got " +
                             std::to_string(args.size()));
    int out_arity = args.empty() ? 0 : args[0].arity();
    for (const auto& a : args)
        if (a.arity() != out_arity) throw DimensionError("compose: argument arity mismatch");
    MultiPoly out(out_arity);
    for (const auto& [e, c] : terms_) {
        MultiPoly term = MultiPoly::constant(out_arity, c);
        for (int i = 0; i < arity_; ++i)
            if (e[i] > 0) term = term * args[i].pow(e[i]);
        out = out + term;
    }
    return out;
}

MultiPoly MultiPoly::remap(int new_arity, std::span<const int> mapping) const {
    if (static_cast<int>(mapping.size()) != arity_)
        throw DimensionError("remap: mapping length != arity");
    MultiPoly out(new_arity);
    for (const auto& [e, c] : terms_) {
        ExponentVec ne(new_arity, 0);
        for (int i = 0; i < arity_; ++i) {
            if (e[i] == 0) continue;
            int j = mapping[i];
            if (j < 0 || j >= new_arity) throw DimensionError("remap: target index out of range");
            ne[j] += e[i];
        }
        out.add_term(ne, c);
    }
    return out;
}

template <typename Scalar>
Scalar MultiPoly::eval_as(std::span<const Scalar> point) const {
    if (static_cast<int>(point.size()) != arity_)
        throw DimensionError("eval: point dimension " + std::to_string(point.size()) +
                             " != arity " + std::to_string(arity_));
    // Per-variable power tables keep evaluation deterministic and cheap.
    std::vector<std::vector<Scalar>> powers(arity_);
    for (const auto& [e, c] : terms_) {
        for (int i = 0; i < arity_; ++i) {
            auto& tab = powers[i];
            if (tab.empty()) tab.push_back(Scalar(1));
            while (tab.size() <= e[i]) tab.push_back(tab.back() * point[i]);
        }
    }
    Scalar acc(0);
    for (const auto& [e, c] : terms_) {
        Scalar term = scalar_from_rational<Scalar>(c);
        for (int i = 0; i < arity_; ++i)
            if (e[i] > 0) term *= powers[i][e[i]];
        acc += term;
    }
    return acc;
}

template double MultiPoly::eval_as<double>(std::span<const double>) const;
template Real MultiPoly::eval_as<Real>(std::span<const Real>) const;

Real MultiPoly::eval(std::span<const Real> point, unsigned precision_bits) const {
    if (precision_bits < 53) throw ParameterError("eval precision must be >= 53 bits");
    PrecisionGuard guard(precision_bits);
    // Round the point into the working precision so the result is a pure
    // function of (polynomial, point, precision).
    std::vector<Real> local(point.size());
    for (size_t i = 0; i < point.size(); ++i) local[i] = Real(point[i]);
    return eval_as<Real>(local);
}

Rational MultiPoly::eval_exact(std::span<const Rational> point) const {
    if (static_cast<int>(point.size()) != arity_)
        throw DimensionError("eval_exact: point dimension != arity");
    Rational acc = 0;
    for (const auto& [e, c] : terms_) {
        Rational term = c;
        for (int i = 0; i < arity_; ++i)
            for (uint32_t k = 0; k < e[i]; ++k) term *= point[i];
        acc += term;
    }
    return acc;
}

std::string MultiPoly::to_string(const std::string& var_prefix) const {
    if (terms_.empty()) return "0";
    std::ostringstream out;
    bool first = true;
    for (const auto& [e, c] : terms_) {
        Rational a = c;
        if (first) {
            if (a < 0) {
                out << "-";
                a = -a;
            }
        } else {
            out << (a < 0 ? " - " : " + ");
            if (a < 0) a = -a;
        }
        first = false;
        bool has_vars = std::any_of(e.begin(), e.end(), [](uint32_t x) { return x > 0; });
        bool need_star = false;
        if (a != 1 || !has_vars) {
            out << rational_to_string(a);
            need_star = true;
        }
        for (int i = 0; i < arity_; ++i) {
            if (e[i] == 0) continue;
            if (need_star) out << "*";
            out << var_prefix << (i + 1);
            if (e[i] > 1) out << "^" << e[i];
            need_star = true;
        }
    }
    return out.str();
}

PolyVector::PolyVector(int arity, std::vector<MultiPoly> components)
    : arity_(arity), components_(std::move(components)) {
    for (const auto& p : components_)
        if (p.arity() != arity_) throw DimensionError("PolyVector component arity mismatch");
}

PolyVector PolyVector::zero(int arity, int count) {
    PolyVector v(arity);
    for (int i = 0; i < count; ++i) v.push_back(MultiPoly::zero(arity));
    return v;
}

void PolyVector::push_back(MultiPoly p) {
    if (p.arity() != arity_) throw DimensionError("PolyVector component arity mismatch");
    components_.push_back(std::move(p));
}

PolyVector PolyVector::compose(std::span<const MultiPoly> args) const {
    int out_arity = args.empty() ? 0 : args[0].arity();
    PolyVector out(out_arity);
    for (const auto& p : components_) out.push_back(p.compose(args));
    return out;
}

PolyVector PolyVector::remap(int new_arity, std::span<const int> mapping) const {
    PolyVector out(new_arity);
    for (const auto& p : components_) out.push_back(p.remap(new_arity, mapping));
    return out;
}

bool PolyVector::operator==(const PolyVector& rhs) const {
    return arity_ == rhs.arity_ && components_ == rhs.components_;
}

DegreeSigma degree_and_sigma(const MultiPoly& p) {
    return DegreeSigma{p.degree(), p.sigma()};
}

DegreeSigma degree_and_sigma(const PolyVector& p) {
    DegreeSigma ds;
    for (const auto& c : p.components()) {
        ds.k = std::max(ds.k, c.degree());
        ds.sigma += c.sigma();
    }
    return ds;
}

namespace {

// Minimal recursive-descent parser for the canonical syntax:
//   poly   := [+-] term { (+|-) term }
//   term   := factor { '*' factor }
//   factor := rational | var [ '^' int ]
//   var    := prefix digits   (prefix letters, e.g. x1, y2)
struct PolyParser {
    const std::string& s;
    size_t pos = 0;

    explicit PolyParser(const std::string& text) : s(text) {}

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) {
        throw ParseError(msg + " in polynomial '" + s + "'", 1, static_cast<int>(pos) + 1);
    }

    struct Factor {
        int var = -1; // -1: pure coefficient
        uint32_t exp = 1;
        Rational coeff = 1;
    };

    Factor parse_factor() {
        skip_ws();
        Factor f;
        if (pos >= s.size()) fail("unexpected end");
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t start = pos;
            while (pos < s.size() &&
                   (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.' || s[pos] == '/' ||
                    ((s[pos] == 'e' || s[pos] == 'E') && pos + 1 < s.size() &&
                     (std::isdigit(static_cast<unsigned char>(s[pos + 1])) || s[pos + 1] == '+' || s[pos + 1] == '-')) ||
                    ((s[pos] == '+' || s[pos] == '-') && (s[pos - 1] == 'e' || s[pos - 1] == 'E'))))
                ++pos;
            f.coeff = parse_rational(s.substr(start, pos - start));
            return f;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            while (pos < s.size() && std::isalpha(static_cast<unsigned char>(s[pos]))) ++pos;
            size_t digit_start = pos;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
            if (digit_start == pos) fail("variable needs an index (e.g. x1)");
            f.var = std::stoi(s.substr(digit_start, pos - digit_start)) - 1;
            if (f.var < 0) fail("variable indices start at 1");
            if (eat('^')) {
                skip_ws();
                size_t es = pos;
                while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
                if (es == pos) fail("expected exponent");
                f.exp = static_cast<uint32_t>(std::stoul(s.substr(es, pos - es)));
            }
            return f;
        }
        fail("unexpected character");
    }

    void parse_term(int sign, std::vector<std::pair<std::map<int, uint32_t>, Rational>>& terms) {
        Rational coeff = sign;
        std::map<int, uint32_t> exps;
        while (true) {
            Factor f = parse_factor();
            if (f.var < 0)
                coeff *= f.coeff;
            else
                exps[f.var] += f.exp;
            if (!eat('*')) break;
        }
        terms.emplace_back(std::move(exps), coeff);
    }

    MultiPoly parse(int arity) {
        std::vector<std::pair<std::map<int, uint32_t>, Rational>> terms;
        skip_ws();
        if (pos >= s.size()) {
            if (arity < 0) arity = 0;
            return MultiPoly::zero(arity);
        }
        int sign = 1;
        if (eat('-')) sign = -1;
        else eat('+');
        parse_term(sign, terms);
        while (true) {
            skip_ws();
            if (eat('+')) parse_term(1, terms);
            else if (eat('-')) parse_term(-1, terms);
            else break;
        }
        skip_ws();
        if (pos != s.size()) fail("trailing input");
        int max_var = -1;
        for (const auto& [e, c] : terms)
            for (const auto& [v, x] : e) max_var = std::max(max_var, v);
        if (arity < 0) arity = max_var + 1;
        if (max_var >= arity) fail("variable index exceeds declared arity");
        MultiPoly p(arity);
        for (const auto& [e, c] : terms) {
            ExponentVec ev(arity, 0);
            for (const auto& [v, x] : e) ev[v] = x;
            p.add_term(ev, c);
        }
        return p;
    }
};

} // namespace

MultiPoly parse_poly(const std::string& text, int arity) {
    PolyParser parser(text);
    return parser.parse(arity);
}

} // namespace polyode
