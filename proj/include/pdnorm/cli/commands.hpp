#pragma once

// The pdnorm subcommands. Each returns the report document plus the CSV
// side files; writing them to disk is left to the caller.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <pdnorm/cli/problem_spec.hpp>
#include <pdnorm/maps.hpp>
#include <pdnorm/prepare.hpp>
#include <pdnorm/spectrum.hpp>
#include <pdnorm/voc.hpp>

namespace pdnorm::cli
{

inline constexpr const char *version = "1.0.0";

struct request {
    std::string command;
    std::string spec_path;
    std::optional<std::string> out_dir;
    std::optional<std::string> report_path;
    std::optional<double> tol;
    std::optional<double> q;
    std::optional<int> degree;
    std::optional<int> m;
    std::optional<std::size_t> points;
    std::optional<std::uint64_t> seed;
    bool trajectory = false;
};

// Effective options after merging command-line flags over spec options over
// defaults. Negative values mean "derived".
struct resolved_options {
    double q = 1.1;
    double tol = 1e-10;
    double radius_cap = 10.0;
    std::uint64_t seed = 0;
    int degree_bound = -1;
    int m = -1;
    double delta = -1.0;
    std::size_t samples_per_sphere = 20000;
    std::size_t points = 100;
    int degree = 6;
};

inline resolved_options resolve(const problem_spec &s, const request &r)
{
    resolved_options o;
    const auto &so = s.options;
    o.q = r.q.value_or(so.q.value_or(o.q));
    o.tol = r.tol.value_or(so.tol.value_or(o.tol));
    o.radius_cap = so.radius_cap.value_or(o.radius_cap);
    o.seed = r.seed.value_or(so.seed.value_or(o.seed));
    o.degree_bound = so.degree_bound.value_or(o.degree_bound);
    o.m = r.m.value_or(so.m.value_or(o.m));
    o.delta = so.delta.value_or(o.delta);
    o.samples_per_sphere = so.samples_per_sphere.value_or(o.samples_per_sphere);
    o.points = r.points.value_or(so.points.value_or(o.points));
    o.degree = r.degree.value_or(so.degree.value_or(o.degree));
    if (!(o.q > 1.0)) {
        throw InvalidInput("q must exceed 1");
    }
    if (!(o.tol > 0.0)) {
        throw InvalidInput("tol must be positive");
    }
    if (o.degree < 1) {
        throw InvalidInput("degree must be >= 1");
    }
    if (r.m && *r.m < 2) {
        throw InvalidInput("m must be >= 2");
    }
    return o;
}

inline json options_json(const resolved_options &o)
{
    json j;
    j["q"] = o.q;
    j["tol"] = o.tol;
    j["radius_cap"] = o.radius_cap;
    j["seed"] = o.seed;
    j["degree_bound"] = o.degree_bound;
    j["m"] = o.m;
    j["delta"] = o.delta;
    j["samples_per_sphere"] = o.samples_per_sphere;
    j["points"] = o.points;
    j["degree"] = o.degree;
    return j;
}

inline resolved_options options_from_json(const json &j)
{
    resolved_options o;
    o.q = j.at("q").get<double>();
    o.tol = j.at("tol").get<double>();
    o.radius_cap = j.at("radius_cap").get<double>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.degree_bound = j.at("degree_bound").get<int>();
    o.m = j.at("m").get<int>();
    o.delta = j.at("delta").get<double>();
    o.samples_per_sphere = j.at("samples_per_sphere").get<std::size_t>();
    o.points = j.at("points").get<std::size_t>();
    o.degree = j.at("degree").get<int>();
    return o;
}

struct result {
    json report;
    // (file name, contents) for the CSV side files.
    std::vector<std::pair<std::string, std::string>> files;
    // Non-zero when the command completed but found an inconsistency.
    int exit_code = 0;
};

namespace detail
{

inline json num(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

inline json complex_json(cplx v)
{
    return json::array({v.real(), v.imag()});
}

inline json vector_json(const cvec &v)
{
    json a = json::array();
    for (const auto &x : v) {
        a.push_back(complex_json(x));
    }
    return a;
}

inline cvec vector_from_json(const json &a)
{
    cvec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = cplx(a[i].at(0).get<double>(), a[i].at(1).get<double>());
    }
    return v;
}

inline json terms_json(const coeff_table &t)
{
    json a = json::array();
    for (const auto &[k, c] : t) {
        json e;
        e["component"] = k.component + 1;
        e["exponents"] = k.index.exponents();
        e["value"] = complex_json(c);
        a.push_back(e);
    }
    return a;
}

inline json resonances_json(const resonance_set &r)
{
    json j;
    j["degree_bound"] = r.degree_bound;
    j["tol"] = r.tol;
    json e = json::array();
    for (const auto &k : r.entries) {
        e.push_back(json{{"component", k.component + 1}, {"exponents", k.index.exponents()}});
    }
    j["entries"] = e;
    return j;
}

inline json map_json(const poly_map &p)
{
    json j;
    json lin = json::array();
    for (Eigen::Index i = 0; i < p.linear().rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < p.linear().cols(); ++k) {
            row.push_back(complex_json(p.linear()(i, k)));
        }
        lin.push_back(row);
    }
    j["linear"] = lin;
    j["truncation_degree"] = p.truncation_degree();
    j["terms"] = terms_json(p.coefficients());
    return j;
}

inline std::string csv_number(double v)
{
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

inline std::string exponents_label(const multi_index &m)
{
    std::string s;
    for (std::size_t k = 0; k < m.size(); ++k) {
        s += (k ? " " : "") + std::to_string(m[k]);
    }
    return s;
}

inline std::string taylor_csv(const taylor_table &t)
{
    std::string out = "component,exponents,degree,re,im,abs\n";
    for (const auto &[k, c] : t.coefficients) {
        out += std::to_string(k.component + 1) + "," + exponents_label(k.index) + "," + std::to_string(k.index.degree())
               + "," + csv_number(c.real()) + "," + csv_number(c.imag()) + "," + csv_number(std::abs(c)) + "\n";
    }
    return out;
}

inline json taylor_json(const taylor_table &t)
{
    json j;
    j["sample_radius"] = t.sample_radius;
    j["degree"] = t.degree;
    j["samples_per_circle"] = t.samples_per_circle;
    j["aliasing_estimate"] = t.aliasing_estimate;
    j["coefficients"] = terms_json(t.coefficients);
    return j;
}

inline std::vector<cplx> eigenvalues_of(const problem_spec &s)
{
    return s.eigenvalues;
}

// ---------------------------------------------------------------------------
// Flow pipeline

struct flow_pipeline {
    poly_vector_field field;
    spectrum_info info;
    prepared_form prep;
    radius_report radius;
    int m_min = 2;
};

inline json flow_spectrum(const problem_spec &s, const resolved_options &o, spectrum_info &info)
{
    const auto p = check_poincare(s.eigenvalues);
    if (!p.poincare) {
        std::string w;
        for (std::size_t k = 0; k < p.witness.size(); ++k) {
            w += (k ? ", " : "") + csv_number(p.witness[k]);
        }
        throw NotPoincare("0 lies in the convex hull of the eigenvalues (convex weights: " + w + ")");
    }
    info = select_direction(s.eigenvalues, s.epsilon);
    const int bound = o.degree_bound > 0 ? o.degree_bound : complete_resonance_bound(info);
    json j;
    j["kind"] = "flow";
    j["poincare"] = true;
    json ev = json::array();
    for (const auto &v : s.eigenvalues) {
        ev.push_back(complex_json(v));
    }
    j["eigenvalues"] = ev;
    j["epsilon"] = s.epsilon;
    j["direction"] = complex_json(info.direction);
    j["alpha"] = info.alpha;
    j["beta"] = info.beta;
    j["resonances"] = resonances_json(resonances(s.eigenvalues, bound));
    return j;
}

inline json flow_prepared(const problem_spec &s, const resolved_options &o, flow_pipeline &pl)
{
    pl.field = s.field();
    pl.m_min = default_flatness_flow(pl.field, o.q);
    int m = pl.m_min;
    if (o.m > 0) {
        if (o.m < pl.m_min) {
            throw InsufficientFlatness("m = " + std::to_string(o.m) + " is below the minimal flatness order "
                                       + std::to_string(pl.m_min));
        }
        m = o.m;
    }
    prepare_options po;
    po.q = o.q;
    pl.prep = prepare_flow(pl.field, m, po);
    json j;
    j["m"] = m;
    j["m_min"] = pl.m_min;
    j["q"] = o.q;
    j["x0_nonlinear"] = pl.prep.x0_nonlinear();
    j["tail_rate"] = flow_tail_rate(pl.info, m);
    j["output_degree"] = pl.prep.output_degree;
    j["change"] = map_json(pl.prep.change);
    j["change_inverse"] = map_json(pl.prep.change_inverse);
    j["x0"] = terms_json(pl.prep.x0.coefficients());
    json x1;
    x1["term_count"] = pl.prep.x1.coefficients().size();
    const int fo = flatness_order(pl.prep.x1);
    x1["flatness_order"] = fo == infinite_order ? json(nullptr) : json(fo);
    x1["terms"] = terms_json(pl.prep.x1.coefficients());
    j["x1"] = x1;
    return j;
}

inline json flow_radius(const resolved_options &o, flow_pipeline &pl)
{
    radius_config rc;
    rc.samples = o.samples_per_sphere;
    rc.cap = o.radius_cap;
    rc.seed = o.seed;
    pl.radius = transversality_radius(pl.prep.prepared_field(), pl.info, rc);
    pl.prep.working_radius = pl.radius.working();
    pl.prep.flatness_constant = flatness_constant(pl.prep.x1.coefficients(), pl.prep.m, pl.prep.working_radius);
    json j;
    j["certified_lower"] = num(pl.radius.certified_lower);
    j["sampled_estimate"] = num(pl.radius.sampled_estimate);
    j["unbounded"] = pl.radius.unbounded;
    j["working_radius"] = pl.radius.working();
    j["samples_per_sphere"] = pl.radius.samples_per_sphere;
    j["bisection_tol"] = pl.radius.bisection_tol;
    j["cap"] = pl.radius.cap;
    j["seed"] = pl.radius.seed;
    return j;
}

inline voc_config flow_voc(const flow_pipeline &pl)
{
    voc_config vc;
    vc.escape_radius = pl.radius.unbounded ? 10.0 * pl.radius.cap : 2.0 * pl.radius.working();
    return vc;
}

inline constexpr double conjugacy_times[] = {0.1, 0.5, 1.0};

inline json flow_results(const resolved_options &o, const flow_pipeline &pl, result &res, bool trajectory)
{
    const normalizer L(pl.prep, pl.info, o.tol, flow_voc(pl));
    const std::size_t n = pl.field.dim();
    const double r_work = pl.radius.working();
    const auto pts = ball_points(o.points, n, 0.5 * r_work, o.seed);
    std::vector<linearization_sample> samples(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { samples[i] = L.sample(pts[i]); });

    json j;
    json sj = json::array();
    double max_tail = 0.0;
    for (const auto &s : samples) {
        json e;
        e["w"] = vector_json(s.z);
        e["z_original"] = vector_json(eval(pl.prep.change_inverse, s.z));
        e["value"] = vector_json(s.value);
        e["tail_bound"] = s.tail_bound;
        e["t"] = s.t_reached;
        e["steps"] = s.steps;
        sj.push_back(e);
        max_tail = std::max(max_tail, s.tail_bound);
    }
    j["sample_radius"] = 0.5 * r_work;
    j["samples"] = sj;
    j["max_tail_bound"] = max_tail;

    const double tr = std::min(0.3, 0.5 * r_work);
    const auto tt = taylor_coefficients(L, tr, o.degree);
    j["taylor"] = taylor_json(tt);
    res.files.emplace_back("taylor.csv", taylor_csv(tt));

    std::string csv = "tau,point,residual\n";
    json rj = json::array();
    for (double tau : conjugacy_times) {
        const auto r = conjugacy_residuals(L, pts, tau);
        double mx = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            csv += csv_number(tau) + "," + std::to_string(i) + "," + csv_number(r[i]) + "\n";
            mx = std::max(mx, r[i]);
        }
        rj.push_back(json{{"tau", tau}, {"max_residual", mx}});
    }
    j["conjugacy_residuals"] = rj;
    res.files.emplace_back("residuals.csv", csv);

    if (pl.prep.x0_nonlinear()) {
        j["domain"] = nullptr;
        j["notes"] = json::array({"X0 has resonant nonlinear terms; the domain report covers linearizations only"});
    } else {
        const auto d = domain_report(L, pl.radius, o.points);
        json dj;
        dj["radius"] = d.radius;
        dj["points"] = d.points;
        dj["converged"] = d.converged;
        dj["success_rate"] = d.success_rate;
        dj["max_tail_bound"] = d.max_tail_bound;
        dj["min_abs_det"] = num(d.min_abs_det);
        dj["failures"] = d.failures;
        j["domain"] = dj;
    }
    if (trajectory && !pts.empty()) {
        std::ostringstream ss;
        ss << "t";
        for (std::size_t k = 0; k < n; ++k) {
            ss << ",re_w" << k + 1 << ",im_w" << k + 1;
        }
        ss << ",err\n";
        ss.precision(17);
        (void)L.sample(pts.front(), &ss);
        res.files.emplace_back("trajectory.csv", ss.str());
    }
    return j;
}

// ---------------------------------------------------------------------------
// Map pipeline

struct map_pipeline {
    prepared_map prep;
    int m_min = 2;
};

inline json map_spectrum(const problem_spec &s, const resolved_options &o)
{
    const auto p = check_poincare_map(s.eigenvalues);
    if (!p.contracting) {
        throw NotPoincare("multipliers are not inside the unit disc: " + p.hint);
    }
    const int bound = o.degree_bound > 0 ? o.degree_bound : complete_resonance_bound_map(s.eigenvalues);
    double lo = infinity, hi = 0.0;
    for (const auto &v : s.eigenvalues) {
        lo = std::min(lo, std::abs(v));
        hi = std::max(hi, std::abs(v));
    }
    json j;
    j["kind"] = "map";
    j["poincare"] = true;
    json ev = json::array();
    for (const auto &v : s.eigenvalues) {
        ev.push_back(complex_json(v));
    }
    j["eigenvalues"] = ev;
    j["epsilon"] = s.epsilon;
    j["rho_star"] = lo;
    j["rho_sup"] = hi;
    j["resonances"] = resonances_json(resonances_map(s.eigenvalues, bound));
    return j;
}

inline json map_prepared(const problem_spec &s, const resolved_options &o, map_pipeline &pl)
{
    pl.m_min = min_flatness_map(s.eigenvalues, s.epsilon, o.q);
    int m = pl.m_min;
    if (o.m > 0) {
        if (o.m < pl.m_min) {
            throw InsufficientFlatness("m = " + std::to_string(o.m) + " is below the minimal flatness order "
                                       + std::to_string(pl.m_min));
        }
        m = o.m;
    }
    prepare_options po;
    po.q = o.q;
    pl.prep = prepare_map(s.map(), m, po);
    json j;
    j["m"] = m;
    j["m_min"] = pl.m_min;
    j["q"] = o.q;
    j["output_degree"] = pl.prep.output_degree;
    j["change"] = map_json(pl.prep.change);
    j["change_inverse"] = map_json(pl.prep.change_inverse);
    j["f0"] = terms_json(pl.prep.f0);
    json f1;
    f1["term_count"] = pl.prep.f1.size();
    const int fo = flatness_order(pl.prep.f1);
    f1["flatness_order"] = fo == infinite_order ? json(nullptr) : json(fo);
    f1["terms"] = terms_json(pl.prep.f1);
    j["f1"] = f1;
    return j;
}

inline map_config map_cfg(const resolved_options &o)
{
    map_config mc;
    mc.delta = o.delta;
    mc.radius_cap = o.radius_cap;
    return mc;
}

inline json map_radius(const map_linearizer &L)
{
    json j;
    j["delta"] = L.delta();
    j["r_delta"] = L.radius();
    j["theta"] = L.theta();
    return j;
}

inline json map_results(const resolved_options &o, const map_linearizer &L, result &res, bool trajectory)
{
    const std::size_t n = L.spec().mu.size();
    const auto pts = ball_points(o.points, n, 0.5 * L.radius(), o.seed);
    std::vector<linearization_sample> samples(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { samples[i] = L.sample(pts[i]); });

    json j;
    json sj = json::array();
    double max_tail = 0.0, max_ratio = 0.0;
    for (const auto &s : samples) {
        json e;
        e["w"] = vector_json(s.z);
        e["value"] = vector_json(s.value);
        e["tail_bound"] = s.tail_bound;
        e["terms"] = s.steps;
        sj.push_back(e);
        max_tail = std::max(max_tail, s.tail_bound);
        for (std::size_t l = 3; l + 1 < s.increments.size(); ++l) {
            if (s.increments[l] > 0) {
                max_ratio = std::max(max_ratio, s.increments[l + 1] / s.increments[l]);
            }
        }
    }
    j["sample_radius"] = 0.5 * L.radius();
    j["samples"] = sj;
    j["max_tail_bound"] = max_tail;
    j["max_increment_ratio"] = max_ratio;

    const auto tt = map_taylor_coefficients(L, 0.9 * L.radius(), o.degree);
    j["taylor"] = taylor_json(tt);
    res.files.emplace_back("taylor.csv", taylor_csv(tt));

    std::string csv = "point,residual\n";
    double mx = 0.0;
    std::vector<double> r(pts.size(), 0.0);
    parallel_for(pts.size(), [&](std::size_t i) {
        r[i] = (L.linear() * samples[i].value - L(eval(L.map(), pts[i]))).norm();
    });
    for (std::size_t i = 0; i < r.size(); ++i) {
        csv += std::to_string(i) + "," + csv_number(r[i]) + "\n";
        mx = std::max(mx, r[i]);
    }
    j["conjugacy_residual"] = mx;
    res.files.emplace_back("residuals.csv", csv);

    if (trajectory && !pts.empty()) {
        std::vector<map_series_state> trace;
        (void)L.sample(pts.front(), &trace);
        std::string t = "l";
        for (std::size_t k = 0; k < n; ++k) {
            t += ",re_L" + std::to_string(k + 1) + ",im_L" + std::to_string(k + 1);
        }
        t += ",delta_norm\n";
        for (const auto &st : trace) {
            t += std::to_string(st.l);
            for (const auto &v : st.partial) {
                t += "," + csv_number(v.real()) + "," + csv_number(v.imag());
            }
            t += "," + csv_number(st.delta_norm) + "\n";
        }
        res.files.emplace_back("trajectory.csv", t);
    }
    return j;
}

inline void require_kind(const problem_spec &s, const char *kind, const std::string &command)
{
    if (s.kind != kind) {
        throw InvalidInput(command + " expects a spec of kind \"" + kind + "\", got \"" + s.kind + "\"");
    }
}

} // namespace detail

inline json base_report(const std::string &command, const std::string &hash, const resolved_options &o)
{
    json r;
    r["command"] = command;
    r["input_hash"] = hash;
    r["options"] = options_json(o);
    return r;
}

inline void finish(json &report, const resolved_options &o)
{
    json p;
    p["version"] = version;
    p["seed"] = o.seed;
    report["provenance"] = p;
}

// Runs one command on the raw spec bytes. Every section besides
// provenance.timestamp (added by the caller) is deterministic.
inline result run(const request &req, const std::string &spec_bytes, const json *stored_report = nullptr)
{
    const problem_spec spec = parse_problem_spec_text(spec_bytes);
    const resolved_options o = resolve(spec, req);
    const std::string hash = input_hash(spec_bytes);
    result res;
    res.report = base_report(req.command, hash, o);
    json &rep = res.report;

    if (req.command == "analyze") {
        if (spec.is_map()) {
            rep["spectrum"] = detail::map_spectrum(spec, o);
        } else {
            spectrum_info info;
            rep["spectrum"] = detail::flow_spectrum(spec, o, info);
        }
    } else if (req.command == "prepare") {
        if (spec.is_map()) {
            rep["spectrum"] = detail::map_spectrum(spec, o);
            detail::map_pipeline pl;
            rep["prepared"] = detail::map_prepared(spec, o, pl);
        } else {
            detail::flow_pipeline pl;
            rep["spectrum"] = detail::flow_spectrum(spec, o, pl.info);
            rep["prepared"] = detail::flow_prepared(spec, o, pl);
        }
    } else if (req.command == "radius") {
        if (spec.is_map()) {
            rep["spectrum"] = detail::map_spectrum(spec, o);
            detail::map_pipeline pl;
            rep["prepared"] = detail::map_prepared(spec, o, pl);
            const map_linearizer L(make_map_spec(pl.prep), o.tol, detail::map_cfg(o));
            rep["radius"] = detail::map_radius(L);
        } else {
            detail::flow_pipeline pl;
            rep["spectrum"] = detail::flow_spectrum(spec, o, pl.info);
            rep["prepared"] = detail::flow_prepared(spec, o, pl);
            rep["radius"] = detail::flow_radius(o, pl);
            rep["prepared"]["flatness_constant"] = pl.prep.flatness_constant;
        }
    } else if (req.command == "linearize") {
        detail::require_kind(spec, "flow", req.command);
        detail::flow_pipeline pl;
        rep["spectrum"] = detail::flow_spectrum(spec, o, pl.info);
        rep["prepared"] = detail::flow_prepared(spec, o, pl);
        rep["radius"] = detail::flow_radius(o, pl);
        rep["prepared"]["flatness_constant"] = pl.prep.flatness_constant;
        rep["results"] = detail::flow_results(o, pl, res, req.trajectory);
    } else if (req.command == "map-linearize") {
        detail::require_kind(spec, "map", req.command);
        rep["spectrum"] = detail::map_spectrum(spec, o);
        detail::map_pipeline pl;
        rep["prepared"] = detail::map_prepared(spec, o, pl);
        const map_linearizer L(make_map_spec(pl.prep), o.tol, detail::map_cfg(o));
        rep["radius"] = detail::map_radius(L);
        rep["results"] = detail::map_results(o, L, res, req.trajectory);
    } else if (req.command == "verify") {
        if (!stored_report) {
            throw InvalidInput("verify: no stored report");
        }
        const json &old = *stored_report;
        if (old.value("input_hash", std::string{}) != hash) {
            throw InvalidInput("verify: report was produced from a different spec (hash "
                               + old.value("input_hash", std::string{"?"}) + ", spec " + hash + ")");
        }
        if (!old.contains("results") || !old.contains("options")) {
            throw InvalidInput("verify: stored report has no results section");
        }
        const resolved_options so = options_from_json(old.at("options"));
        rep["options"] = options_json(so);
        const auto &stored = old.at("results").at("samples");
        std::vector<cvec> pts, values;
        for (const auto &e : stored) {
            pts.push_back(detail::vector_from_json(e.at("w")));
            values.push_back(detail::vector_from_json(e.at("value")));
        }
        std::vector<double> dev(pts.size(), 0.0);
        double residual = 0.0, stored_residual = 0.0;
        if (spec.is_map()) {
            detail::map_pipeline pl;
            (void)detail::map_spectrum(spec, so);
            (void)detail::map_prepared(spec, so, pl);
            const map_linearizer L(make_map_spec(pl.prep), so.tol, detail::map_cfg(so));
            parallel_for(pts.size(), [&](std::size_t i) { dev[i] = (L(pts[i]) - values[i]).norm(); });
            residual = map_conjugacy_residual(L, pts);
            stored_residual = old.at("results").at("conjugacy_residual").get<double>();
        } else {
            detail::flow_pipeline pl;
            (void)detail::flow_spectrum(spec, so, pl.info);
            (void)detail::flow_prepared(spec, so, pl);
            (void)detail::flow_radius(so, pl);
            const normalizer L(pl.prep, pl.info, so.tol, detail::flow_voc(pl));
            parallel_for(pts.size(), [&](std::size_t i) { dev[i] = (L(pts[i]) - values[i]).norm(); });
            for (double tau : detail::conjugacy_times) {
                const auto r = conjugacy_residuals(L, pts, tau);
                for (double x : r) {
                    residual = std::max(residual, x);
                }
            }
            for (const auto &e : old.at("results").at("conjugacy_residuals")) {
                stored_residual = std::max(stored_residual, e.at("max_residual").get<double>());
            }
        }
        const double max_dev = dev.empty() ? 0.0 : *std::max_element(dev.begin(), dev.end());
        const bool consistent = max_dev <= 10.0 * so.tol && residual <= std::max(10.0 * so.tol, 2.0 * stored_residual);
        json v;
        v["points"] = pts.size();
        v["max_value_deviation"] = max_dev;
        v["max_residual"] = residual;
        v["stored_max_residual"] = stored_residual;
        v["consistent"] = consistent;
        rep["verification"] = v;
        res.exit_code = consistent ? 0 : 3;
        finish(rep, so);
        return res;
    } else {
        throw InvalidInput("unknown command \"" + req.command + "\"");
    }
    finish(rep, o);
    return res;
}

} // namespace pdnorm::cli
