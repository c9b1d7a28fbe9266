#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "magweyl/inversion.hpp"
#include "magweyl/moyal.hpp"
#include "magweyl/parallel.hpp"
#include "magweyl/spectral.hpp"
#include "magweyl/validation.hpp"

namespace magweyl::cli {

namespace {

namespace pt = boost::property_tree;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// shortest of %.15g / %.17g that reads back exactly
std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json num(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

json cnum(cplx z) { return json::array({num(z.real()), num(z.imag())}); }

// Reads keys from the INI tree and records the effective value of every key
// it hands out, defaults included.
class Config {
public:
    explicit Config(pt::ptree t) : in_(std::move(t)) {}

    bool has(const std::string& sec) const { return static_cast<bool>(in_.get_child_optional(sec)); }
    void require(const std::string& sec, const std::string& who) const {
        if (!has(sec)) throw ConfigError("missing [" + sec + "] block (required by " + who + ")");
    }

    std::optional<std::string> maybe(const std::string& sec, const std::string& key) {
        const auto v = in_.get_optional<std::string>(pt::ptree::path_type(sec + "." + key, '.'));
        if (!v) return std::nullopt;
        const std::string s = trim(*v);
        record(sec, key, s);
        return s;
    }

    std::string text(const std::string& sec, const std::string& key, std::optional<std::string> def = std::nullopt) {
        if (auto v = maybe(sec, key)) return *v;
        if (!def) throw ConfigError("missing key '" + key + "' in [" + sec + "]");
        record(sec, key, *def);
        return *def;
    }

    // numbers may be constant expressions such as 4*pi
    double number(const std::string& sec, const std::string& key, std::optional<double> def = std::nullopt) {
        auto v = maybe(sec, key);
        if (!v) {
            if (!def) throw ConfigError("missing key '" + key + "' in [" + sec + "]");
            record(sec, key, g17(*def));
            return *def;
        }
        return constant_value(*v, sec + "." + key);
    }

    std::optional<double> maybe_number(const std::string& sec, const std::string& key) {
        auto v = maybe(sec, key);
        if (!v) return std::nullopt;
        return constant_value(*v, sec + "." + key);
    }

    int integer(const std::string& sec, const std::string& key, std::optional<int> def = std::nullopt) {
        const double v = number(sec, key, def ? std::optional<double>(*def) : std::nullopt);
        if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(sec + "." + key + " must be an integer");
        return static_cast<int>(v);
    }

    bool flag(const std::string& sec, const std::string& key, bool def) {
        const std::string v = text(sec, key, def ? "true" : "false");
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError(sec + "." + key + ": expected true or false, got '" + v + "'");
    }

    std::vector<double> list(const std::string& sec, const std::string& key, const std::string& def) {
        std::vector<double> out;
        std::stringstream ss(text(sec, key, def));
        std::string item;
        while (std::getline(ss, item, ','))
            if (!trim(item).empty()) out.push_back(constant_value(trim(item), sec + "." + key));
        return out;
    }

    // "a,b; c,d"
    std::vector<std::array<double, 2>> pairs(const std::string& sec, const std::string& key) {
        std::vector<std::array<double, 2>> out;
        std::stringstream ss(text(sec, key));
        std::string item;
        while (std::getline(ss, item, ';')) {
            if (trim(item).empty()) continue;
            const auto c = item.find(',');
            if (c == std::string::npos) throw ConfigError(sec + "." + key + ": expected 'a,b' pairs separated by ';'");
            out.push_back({constant_value(trim(item.substr(0, c)), sec + "." + key),
                           constant_value(trim(item.substr(c + 1)), sec + "." + key)});
        }
        if (out.empty()) throw ConfigError(sec + "." + key + " is empty");
        return out;
    }

    void set(const std::string& sec, const std::string& key, const std::string& v) { record(sec, key, v); }

    const pt::ptree& effective() const { return eff_; }

    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [sec, body] : in_)
            for (const auto& [key, _] : body)
                if (!used_.count(sec + "." + key)) out.push_back(sec + "." + key);
        return out;
    }

private:
    static double constant_value(const std::string& s, const std::string& where) {
        try {
            const Expression e = parse_expression(s);
            if (!e.is_constant()) throw ConfigError(where + ": expected a number, got '" + s + "'");
            return e.evaluate({}, {});
        } catch (const ParseError& pe) {
            throw ConfigError(where + ": " + pe.what());
        }
    }

    void record(const std::string& sec, const std::string& key, const std::string& v) {
        eff_.put(pt::ptree::path_type(sec + "." + key, '.'), v);
        used_.insert(sec + "." + key);
    }

    pt::ptree in_, eff_;
    std::set<std::string> used_;
};

Expression checked_expression(const std::string& text, const std::string& where) {
    try {
        return parse_expression(text);
    } catch (const ParseError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

struct Setup {
    PhaseSpaceGrid grid;
    MagneticField B;
    VectorPotential base;  // transversal or explicit
    VectorPotential A;     // working gauge
    std::optional<ScalarField> psi;
    Symbol f;
    int threads = 0;
    std::uint64_t seed = 1;
};

PhaseSpaceGrid read_grid(Config& c, const std::string& who) {
    c.require("grid", who);
    const int n = c.integer("grid", "n");
    const double L = c.number("grid", "L");
    const int N = c.integer("grid", "N");
    try {
        return make_grid(n, L, N);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[grid]: ") + e.what());
    }
}

Symbol read_symbol(Config& c, const std::string& sec, int n, const std::string& who) {
    c.require(sec, who);
    const std::string expr = c.text(sec, "expr");
    const Expression e = checked_expression(expr, sec + ".expr");
    if (e.max_axis(VarKind::X) > n || e.max_axis(VarKind::Xi) > n)
        throw ConfigError(sec + ".expr uses a variable beyond dimension " + std::to_string(n));
    const double m = c.number(sec, "m");
    const double rho = c.number(sec, "rho", 1.0);
    const double delta = c.number(sec, "delta", 0.0);
    const bool real = c.flag(sec, "real", true);
    return Symbol::from_expression(e, n, m, rho, delta, real);
}

Setup read_setup(Config& c, const std::string& who, const RunArgs& args) {
    Setup s;
    s.threads = args.threads;
    s.grid = read_grid(c, who);
    const int n = s.grid.n;

    const std::string b12 = c.text("field", "b12", "0");
    const Expression eb = checked_expression(b12, "field.b12");
    const bool zero_field = eb.is_constant() && eb.evaluate({}, {}) == 0.0;
    if (!zero_field && n != 2) throw ConfigError("[field]: a nonzero field needs n = 2");
    s.B = zero_field ? MagneticField::zero(n) : MagneticField::planar(ScalarField::from_expression(eb));
    if (!zero_field && eb.polynomial_degree_x() >= 0) s.B.field_class = FieldClass::Polynomial;

    const std::string kind = c.text("gauge", "kind", "transversal");
    if (auto p = c.maybe("gauge", "psi")) s.psi = ScalarField::from_expression(checked_expression(*p, "gauge.psi"));
    if (kind == "transversal" || kind == "pair") {
        s.base = zero_field ? VectorPotential::zero(n) : transversal_gauge(s.B);
    } else if (kind == "explicit") {
        std::vector<ScalarField> comps;
        for (int a = 1; a <= n; ++a) {
            const std::string key = "A" + std::to_string(a);
            comps.push_back(ScalarField::from_expression(checked_expression(c.text("gauge", key), "gauge." + key)));
        }
        s.base = VectorPotential::explicit_components(std::move(comps));
    } else {
        throw ConfigError("gauge.kind must be transversal, explicit or pair, got '" + kind + "'");
    }
    s.A = s.base;
    if (kind == "pair") {
        if (!s.psi) throw ConfigError("gauge.kind = pair needs gauge.psi");
        s.A = gauge_shift(s.base, *s.psi);
    }

    s.f = read_symbol(c, "symbol", n, who);
    if (c.flag("symbol", "blend", false)) s.f = seam_blend(s.f, s.grid, c.number("symbol", "blend_inner", 0.35));

    const double seed = c.number("task", "seed", 1.0);
    if (!(seed >= 0) || seed != std::floor(seed)) throw ConfigError("task.seed must be a nonnegative integer");
    s.seed = args.seed ? *args.seed : static_cast<std::uint64_t>(seed);
    // the echo must reproduce the run
    if (args.seed) c.set("task", "seed", std::to_string(*args.seed));
    return s;
}

CoefficientAlgebra read_algebra(Config& c, int n) {
    c.require("algebra", "ess-spectrum");
    const std::string kind = c.text("algebra", "kind");
    if (kind == "constant") return CoefficientAlgebra::constant_coefficients();
    if (kind == "vanishing") return CoefficientAlgebra::vanishing_at_infinity(n);
    if (kind == "limits1d") return CoefficientAlgebra::asymptotic_limits_1d();
    if (kind == "directions") return CoefficientAlgebra::asymptotic_directions(c.pairs("algebra", "directions"));
    if (kind == "periodic")
        return CoefficientAlgebra::periodic(c.pairs("algebra", "lattice"), c.integer("algebra", "translates", 3));
    throw ConfigError("algebra.kind must be constant, vanishing, limits1d, directions or periodic, got '" + kind + "'");
}

json grid_json(const PhaseSpaceGrid& g) { return {{"n", g.n}, {"L", g.L}, {"N", g.N}}; }

std::size_t nearest_node(const PhaseSpaceGrid& g, const std::vector<double>& x) {
    std::array<int, 2> k{0, 0};
    for (int a = 0; a < g.n; ++a) {
        const double t = a < static_cast<int>(x.size()) ? x[a] : 0.0;
        k[a] = std::clamp(static_cast<int>(std::lround((t + 0.5 * g.L) / g.dx())), 0, g.N - 1);
    }
    return g.ravel(k[0], k[1]);
}

void write_csv(const fs::path& p, const Eigen::VectorXd& v) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    char buf[40];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v[i]);
        os << buf;
    }
}

struct Outcome {
    json summary;
    bool passed = true;
    std::optional<Eigen::VectorXd> spectrum;
};

// ---------------------------------------------------------------------------
// commands

Outcome cmd_quantize(Config& c, const RunArgs& args) {
    auto s = read_setup(c, "quantize", args);
    const double tol = c.number("task", "hermitian_tol", 1e-10);
    const auto M = quantize(s.f, s.A, s.grid, s.threads);
    Outcome o;
    const double hd = hermitian_defect(M.matrix);
    o.summary["dimension"] = s.grid.size();
    o.summary["operator_norm"] = M.norm();
    o.summary["frobenius_norm"] = M.matrix.norm();
    o.summary["hermitian_defect"] = hd;
    o.summary["trace"] = cnum(M.matrix.trace());
    o.passed = !s.f.real || hd <= tol;
    return o;
}

Outcome cmd_spectrum(Config& c, const RunArgs& args) {
    auto s = read_setup(c, "spectrum", args);
    const auto landau_b = c.maybe_number("task", "landau_b");
    SpectrumOptions so;
    so.hermitian_tol = c.number("task", "hermitian_tol", 1e-10);
    so.eigenvectors = landau_b.has_value() || c.flag("task", "localization", false);
    const auto sp = spectrum(quantize(s.f, s.A, s.grid, s.threads), so);

    Outcome o;
    o.spectrum = sp.eigenvalues;
    o.summary["count"] = sp.eigenvalues.size();
    o.summary["hermitian_defect"] = sp.hermitian_defect;
    json low = json::array();
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(10, sp.eigenvalues.size()); ++i) low.push_back(sp.eigenvalues[i]);
    o.summary["lowest"] = low;
    o.summary["highest"] = sp.eigenvalues[sp.eigenvalues.size() - 1];

    if (landau_b) {
        const int levels = c.integer("task", "landau_levels", 3);
        const double tol = c.number("task", "landau_tol", 0.01);
        const double gap = c.number("task", "cluster_gap", 0.05 * *landau_b);
        const auto ref = landau_reference(*landau_b, levels - 1);
        const auto cl = localized_clusters(sp, gap);
        json rows = json::array();
        for (int k = 0; k < levels; ++k) {
            json r{{"reference", ref[k]}};
            if (k < static_cast<int>(cl.size())) {
                const double rel = std::abs(cl[k].mean - ref[k]) / ref[k];
                r["mean"] = cl[k].mean;
                r["count"] = cl[k].count;
                r["relative_error"] = rel;
                r["pass"] = rel <= tol;
                o.passed = o.passed && rel <= tol;
            } else {
                r["pass"] = false;
                o.passed = false;
            }
            rows.push_back(r);
        }
        o.summary["landau"] = {{"b", *landau_b}, {"tolerance", tol}, {"cluster_gap", gap}, {"levels", rows}};
    }
    return o;
}

json interval_json(const Interval& I) {
    return {{"lo", num(I.lo)}, {"hi", num(I.hi)}, {"orbits", I.orbits}};
}

Outcome cmd_ess_spectrum(Config& c, const RunArgs& args) {
    auto s = read_setup(c, "ess-spectrum", args);
    const auto alg = read_algebra(c, s.grid.n);
    BulkOptions bo;
    bo.essential.threads = s.threads;
    bo.essential.merge_tol = c.maybe_number("task", "merge_tol");
    bo.tolerance = c.number("task", "tolerance", 0.02);
    const auto expected = c.maybe_number("task", "expected_edge");
    const double edge_tol = c.number("task", "edge_tol", 0.02);
    const auto r = compare_bulk_vs_essential(s.f, alg, s.B, s.grid, bo);

    Outcome o;
    o.spectrum = r.bulk.eigenvalues;
    json orbits = json::array();
    for (const auto& ob : r.essential.orbits) {
        json j{{"orbit", ob.orbit},
               {"constant_coefficients", ob.constant_coefficients},
               {"merge_tol", ob.merge_tol},
               {"lattice_lowest", ob.lattice.eigenvalues[0]}};
        if (ob.range) j["range"] = interval_json(*ob.range);
        json iv = json::array();
        for (const auto& I : ob.intervals) iv.push_back(interval_json(I));
        j["intervals"] = iv;
        orbits.push_back(j);
    }
    json iv = json::array();
    for (const auto& I : r.essential.intervals) iv.push_back(interval_json(I));
    auto eig = [](const std::vector<BulkEigen>& v) {
        json a = json::array();
        for (const auto& e : v) a.push_back({{"value", e.value}, {"localization", e.localization}});
        return a;
    };
    const double edge = r.essential.lower_edge();
    o.summary["orbits"] = orbits;
    o.summary["essential_intervals"] = iv;
    o.summary["lower_edge"] = num(edge);
    o.summary["bulk_lowest"] = r.bulk.eigenvalues[0];
    o.summary["candidates"] = eig(r.candidates);
    o.summary["candidates_localized"] = r.candidates_localized;
    o.summary["delocalized_outside"] = eig(r.delocalized_outside);
    o.passed = r.passed();
    if (expected) {
        const double err = std::abs(edge - *expected);
        const bool ok = err <= edge_tol * std::max(1.0, std::abs(*expected));
        o.summary["edge_check"] = {{"expected", *expected}, {"error", num(err)}, {"pass", ok}};
        o.passed = o.passed && ok;
    }
    return o;
}

Outcome cmd_gauge_check(Config& c, const RunArgs& args) {
    auto s = read_setup(c, "gauge-check", args);
    if (!s.psi) throw ConfigError("gauge-check needs gauge.psi");
    const double tol = c.number("task", "tol", 1e-8);
    const bool control = c.flag("task", "wrong_control", true);
    Outcome o;
    const double r = gauge_covariance_residual(s.f, s.base, *s.psi, s.grid, false, s.threads);
    o.summary["residual"] = r;
    o.summary["tol"] = tol;
    if (control) o.summary["wrong_residual"] = gauge_covariance_residual(s.f, s.base, *s.psi, s.grid, true, s.threads);
    o.passed = r <= tol;
    return o;
}

Outcome cmd_expand(Config& c, const RunArgs& args) {
    auto s = read_setup(c, "expand", args);
    const Symbol g = read_symbol(c, "symbol2", s.grid.n, "expand");
    const int l_max = c.integer("task", "l_max", 2);
    if (l_max < 0 || l_max > kMaxExpansionOrder)
        throw ConfigError("task.l_max must lie in [0, " + std::to_string(kMaxExpansionOrder) + "]");
    const auto x = c.list("task", "x", "0");
    const int axis = c.integer("task", "axis", 0);
    if (axis < 0 || axis >= s.grid.n) throw ConfigError("task.axis out of range");
    const auto orders = c.list("task", "remainder_orders", "1,2");
    const double slope_tol = c.number("task", "slope_tol", 0.3);

    const std::size_t xn = nearest_node(s.grid, x);
    const auto ray = positive_ray(s.grid, axis);
    Outcome o;
    const auto xp = s.grid.position_point(xn);
    o.summary["x_node"] = json::array({xp[0], xp[1]});
    json xi = json::array();
    for (auto j : ray) xi.push_back(s.grid.momentum_point(j)[axis]);
    o.summary["xi"] = xi;
    json terms = json::array();
    for (int l = 0; l <= l_max; ++l) {
        const auto h = expansion_term(s.f, g, s.B, l, s.grid, s.threads);
        json re = json::array(), im = json::array();
        for (auto j : ray) {
            re.push_back(h(static_cast<Eigen::Index>(xn), static_cast<Eigen::Index>(j)).real());
            im.push_back(h(static_cast<Eigen::Index>(xn), static_cast<Eigen::Index>(j)).imag());
        }
        terms.push_back({{"l", l}, {"re", re}, {"im", im}});
    }
    o.summary["terms"] = terms;

    json fits = json::array();
    const double rho = std::min(s.f.rho, g.rho);
    for (double Nd : orders) {
        const int N = static_cast<int>(Nd);
        if (N != Nd || N < 1 || N > kMaxExpansionOrder + 1)
            throw ConfigError("task.remainder_orders entries must be integers in [1, 4]");
        const auto r = remainder_order(s.f, g, s.B, s.A, s.grid, N, xn, ray, s.threads);
        const double expected = s.f.m + g.m - rho * N;
        std::string status;
        if (r.vanishing) status = "vanishing";
        else if (r.low_dynamic_range) status = "inconclusive";
        else status = std::abs(r.slope - expected) <= slope_tol ? "pass" : "fail";
        if (status == "fail") o.passed = false;
        fits.push_back({{"N", N}, {"slope", num(r.slope)}, {"expected", expected}, {"status", status}});
    }
    o.summary["remainder_fits"] = fits;
    return o;
}

Outcome cmd_invert(Config& c, const RunArgs& args) {
    auto s = read_setup(c, "invert", args);
    const cplx z(c.number("task", "z_re"), c.number("task", "z_im", 0.0));
    InversionOptions io;
    io.k_max = c.integer("task", "k_max", io.k_max);
    io.tol = c.number("task", "tol", io.tol);
    io.operator_tol = c.number("task", "operator_tol", io.operator_tol);
    io.threads = s.threads;
    const double accept = c.number("task", "accept", 1e-6);
    const bool dense = c.flag("task", "dense_check", s.grid.size() <= 2048);
    const double dense_accept = c.number("task", "dense_accept", 1e-5);

    check_invertible(s.f, z, s.grid, io);
    Outcome o;
    o.summary["z"] = cnum(z);
    InverseResult r;
    try {
        r = neumann_invert(s.f, z, s.A, s.grid, io);
    } catch (const NeumannDivergence& e) {
        o.summary["diverged"] = e.what();
        o.passed = false;
        return o;
    }
    o.summary["norm_Rz"] = r.norm_Rz;
    o.summary["terms"] = r.terms;
    o.summary["residual"] = r.residual;
    o.summary["operator_residual"] = r.operator_residual;
    o.summary["residual_trace"] = r.residual_history;
    o.passed = r.residual <= accept;
    if (dense) {
        const Eigen::MatrixXcd H = quantize(s.f, s.A, s.grid, s.threads).matrix;
        const Eigen::MatrixXcd D = (H - z * Eigen::MatrixXcd::Identity(H.rows(), H.cols())).inverse();
        const double d = operator_norm(r.matrix - D);
        o.summary["dense_distance"] = d;
        o.passed = o.passed && d <= dense_accept;
    }
    const auto ray = positive_ray(s.grid, 0);
    const auto fit = order_check_inverse(r.samples, nearest_node(s.grid, {0.0, 0.0}), ray, s.threads);
    o.summary["order_slope"] = num(fit.slope);
    o.summary["expected_order"] = -s.f.m;
    return o;
}

Outcome cmd_validate(Config& c, const RunArgs& args) {
    auto s = read_setup(c, "validate", args);
    const auto& g = s.grid;
    const int n = g.n;
    const ScalarField psi = s.psi ? *s.psi : ScalarField::parse(n == 2 ? "x1*x2" : "sin(x1)");
    json table = json::array();
    Outcome o;
    auto row = [&](const std::string& name, double value, double tol) {
        const bool ok = value <= tol;
        table.push_back({{"check", name}, {"value", num(value)}, {"tol", tol}, {"pass", ok}});
        o.passed = o.passed && ok;
    };

    const auto I = quantize(Symbol::constant(1.0, n), s.A, g, s.threads).matrix;
    row("identity symbol gives the identity", (I - Eigen::MatrixXcd::Identity(I.rows(), I.cols())).cwiseAbs().maxCoeff(),
        0.0);

    const auto table_A = phase_table(s.A, g, s.threads);
    const auto M = quantize(s.f, s.A, table_A, s.threads);
    const Eigen::MatrixXcd Mc = quantize(conj(s.f), s.A, table_A, s.threads).matrix;
    row("adjoint: Op(conj f) = Op(f)*", (Mc - M.matrix.adjoint()).norm() / M.matrix.norm(), 1e-10);
    if (s.f.real) row("real symbol gives a Hermitian matrix", hermitian_defect(M.matrix), 1e-10);

    const auto back = quantize(dequantize(M, table_A), s.A, table_A).matrix;
    row("dequantize round trip", (back - M.matrix).cwiseAbs().maxCoeff() / M.matrix.cwiseAbs().maxCoeff(), 1e-12);

    row("gauge covariance", gauge_covariance_residual(s.f, s.A, psi, g, false, s.threads), 1e-8);

    const auto M1 = quantize(s.f, s.A, table_A, 1).matrix;
    const auto Mk = quantize(s.f, s.A, table_A, std::max(2, s.threads)).matrix;
    row("assembly independent of the thread count", M1 == Mk ? 0.0 : 1.0, 0.0);

    if (!s.B.is_zero()) {
        std::mt19937_64 rng(s.seed);
        std::uniform_real_distribution<double> u(-2, 2);
        double worst = 0.0, norm_dev = 0.0;
        using P = std::array<double, 2>;
        auto sp = [](const P& p) { return std::span<const double>(p.data(), 2); };
        for (int t = 0; t < 200; ++t) {
            P q{u(rng), u(rng)}, x{u(rng), u(rng)}, y{u(rng), u(rng)}, z{u(rng), u(rng)};
            P xy{x[0] + y[0], x[1] + y[1]}, yz{y[0] + z[0], y[1] + z[1]}, qx{q[0] + x[0], q[1] + x[1]};
            const cplx lhs = omega_cocycle(s.B, sp(q), sp(xy), sp(z)) * omega_cocycle(s.B, sp(q), sp(x), sp(y));
            const cplx rhs = omega_cocycle(s.B, sp(qx), sp(y), sp(z)) * omega_cocycle(s.B, sp(q), sp(x), sp(yz));
            worst = std::max(worst, std::abs(lhs - rhs));
            const P zero{0.0, 0.0};
            norm_dev = std::max(norm_dev, std::abs(omega_cocycle(s.B, sp(q), sp(x), sp(zero)) - 1.0));
        }
        row("2-cocycle identity (200 random triples)", worst, 1e-8);
        row("cocycle normalization", norm_dev, 0.0);
    }

    if (s.f.real && g.size() <= 1024) {
        const auto e1 = spectrum(M).eigenvalues;
        const auto e2 = spectrum(quantize(s.f, gauge_shift(s.A, psi), g, s.threads)).eigenvalues;
        row("spectrum independent of the gauge", (e1 - e2).cwiseAbs().maxCoeff(), 1e-7);
    }
    o.summary["checks"] = table;
    o.summary["seed"] = s.seed;
    return o;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << s;
}

}  // namespace

int run(const RunArgs& args, std::ostream& log, std::ostream& err) {
    const fs::path out(args.out);
    std::string command = "?";
    try {
        pt::ptree tree;
        try {
            pt::ini_parser::read_ini(args.config, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ConfigError(std::string("cannot read config: ") + e.what());
        }
        if (args.threads < 0) throw ConfigError("--threads must be >= 0");
        set_default_threads(args.threads);
        Config c(tree);
        c.require("task", "every run");
        command = c.text("task", "command");

        Outcome o;
        if (command == "quantize") o = cmd_quantize(c, args);
        else if (command == "spectrum") o = cmd_spectrum(c, args);
        else if (command == "ess-spectrum") o = cmd_ess_spectrum(c, args);
        else if (command == "gauge-check") o = cmd_gauge_check(c, args);
        else if (command == "expand") o = cmd_expand(c, args);
        else if (command == "invert") o = cmd_invert(c, args);
        else if (command == "validate") o = cmd_validate(c, args);
        else
            throw ConfigError("unknown task.command '" + command +
                              "' (expected quantize, spectrum, ess-spectrum, gauge-check, expand, invert or validate)");

        for (const auto& k : c.unused()) err << "warning: unused config key " << k << "\n";

        json summary;
        summary["command"] = command;
        summary["status"] = o.passed ? "pass" : "fail";
        summary["grid"] = grid_json(read_grid(c, command));
        for (auto it = o.summary.begin(); it != o.summary.end(); ++it) summary[it.key()] = it.value();

        fs::create_directories(out);
        std::ostringstream ini;
        pt::ini_parser::write_ini(ini, c.effective());
        write_text(out / "effective.ini", ini.str());
        if (o.spectrum) write_csv(out / "spectrum.csv", *o.spectrum);
        write_text(out / "summary.json", summary.dump(2) + "\n");

        log << command << ": " << (o.passed ? "pass" : "FAIL") << " (" << (out / "summary.json").string() << ")\n";
        if (command == "validate")
            for (const auto& r : o.summary["checks"])
                log << "  " << (r["pass"].get<bool>() ? "PASS" : "FAIL") << "  " << r["check"].get<std::string>()
                    << "  " << r["value"].dump() << " <= " << r["tol"].dump() << "\n";
        return o.passed ? kOk : kValidationFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        try {
            fs::create_directories(out);
            json summary{{"command", command}, {"status", "error"}, {"error", e.what()}};
            write_text(out / "summary.json", summary.dump(2) + "\n");
        } catch (...) {
        }
        return kError;
    }
}

}  // namespace magweyl::cli
