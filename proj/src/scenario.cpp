#include "wrflow/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "wrflow/generators.hpp"

namespace wrflow {

using io::Json;

namespace {

// ------------------------------------------------------------ formatting --

std::string fmt_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return out;
}

std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

void invalid(const std::string& what)
{
    throw Error(ErrorKind::InvalidConfig, what);
}

// ---------------------------------------------------------------- config --

const char* r0_type_name(R0Source::Type t)
{
    switch (t) {
    case R0Source::Type::Explicit: return "explicit";
    case R0Source::Type::Identity: return "identity";
    case R0Source::Type::IdentityOnSubspace: return "identity_on_subspace";
    case R0Source::Type::RandomPsd: return "random_psd";
    }
    return "?";
}

const char* proj_type_name(ProjectionSource::Type t)
{
    switch (t) {
    case ProjectionSource::Type::Explicit: return "explicit";
    case ProjectionSource::Type::CoordinateSplit: return "coordinate_split";
    case ProjectionSource::Type::RandomSubspaceSplit: return "random_subspace_split";
    case ProjectionSource::Type::RandomUnstructured: return "random_unstructured";
    }
    return "?";
}

template <class T>
T get_or(const Json& doc, const char* key, T fallback)
{
    return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

std::optional<std::uint64_t> optional_seed(const Json& doc)
{
    if (!doc.contains("seed")) return std::nullopt;
    return doc.at("seed").get<std::uint64_t>();
}

Matrix columns_from_json(const Json& cols, Index dim)
{
    if (!cols.is_array()) invalid("basis must be a list of column vectors");
    Matrix b(dim, static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const Vector v = io::vector_from_json(cols[c]);
        if (v.size() != dim) invalid("basis column has wrong length");
        b.col(static_cast<Index>(c)) = v;
    }
    return b;
}

} // namespace

ScenarioConfig ScenarioConfig::from_json(const Json& doc)
{
    try {
        ScenarioConfig cfg;
        if (!doc.is_object()) invalid("config must be an object");
        cfg.dim = doc.at("dim").get<Index>();

        const Json r0 = doc.value("r0", Json{{"type", "identity"}});
        const auto r0_type = r0.at("type").get<std::string>();
        if (r0_type == "explicit") {
            cfg.r0.type = R0Source::Type::Explicit;
            cfg.r0.matrix = io::matrix_from_json(r0.at("matrix"));
        } else if (r0_type == "identity") {
            cfg.r0.type = R0Source::Type::Identity;
        } else if (r0_type == "identity_on_subspace") {
            cfg.r0.type = R0Source::Type::IdentityOnSubspace;
            if (r0.contains("basis")) cfg.r0.basis = columns_from_json(r0.at("basis"), cfg.dim);
            cfg.r0.rank = get_or<Index>(r0, "rank", cfg.r0.basis.cols());
            cfg.r0.seed = optional_seed(r0);
        } else if (r0_type == "random_psd") {
            cfg.r0.type = R0Source::Type::RandomPsd;
            cfg.r0.rank = get_or<Index>(r0, "rank", cfg.dim);
            cfg.r0.trace = get_or<double>(r0, "trace", 1.0);
            cfg.r0.seed = optional_seed(r0);
        } else {
            invalid("unknown r0 type '" + r0_type + "'");
        }

        const Json& pj = doc.at("projections");
        const auto p_type = pj.at("type").get<std::string>();
        if (p_type == "explicit") {
            cfg.projections.type = ProjectionSource::Type::Explicit;
            for (const auto& m : pj.at("matrices")) cfg.projections.matrices.push_back(io::matrix_from_json(m));
            cfg.projections.m = cfg.projections.matrices.size();
        } else if (p_type == "coordinate_split") {
            cfg.projections.type = ProjectionSource::Type::CoordinateSplit;
            cfg.projections.m = pj.at("m").get<std::size_t>();
        } else if (p_type == "random_subspace_split") {
            cfg.projections.type = ProjectionSource::Type::RandomSubspaceSplit;
            cfg.projections.m = pj.at("m").get<std::size_t>();
            cfg.projections.seed = optional_seed(pj);
        } else if (p_type == "random_unstructured") {
            cfg.projections.type = ProjectionSource::Type::RandomUnstructured;
            cfg.projections.m = pj.at("m").get<std::size_t>();
            cfg.projections.ranks = get_or<std::vector<Index>>(pj, "ranks", {});
            cfg.projections.blind = get_or<Index>(pj, "blind", 0);
            cfg.projections.seed = optional_seed(pj);
        } else {
            invalid("unknown projections type '" + p_type + "'");
        }

        const Json ms = doc.value("measure", Json{{"kind", "energy"}});
        cfg.measure.kind = measure_kind_from_string(ms.at("kind").get<std::string>());
        if (ms.contains("x")) cfg.measure.x = io::vector_from_json(ms.at("x"));
        cfg.measure.q = get_or<std::vector<double>>(ms, "q", {});
        cfg.measure.dead_tol = get_or<double>(ms, "dead_tol", kDefaultDeadTol);

        cfg.depth = get_or<std::size_t>(doc, "depth", cfg.depth);
        if (doc.contains("max_depth")) cfg.max_depth = doc.at("max_depth").get<std::size_t>();
        cfg.stop_tol = get_or<double>(doc, "stop_tol", cfg.stop_tol);
        const auto mode = get_or<std::string>(doc, "mode", "exhaustive");
        if (mode == "exhaustive") cfg.mode = ProfileMode::Exhaustive;
        else if (mode == "monte_carlo") cfg.mode = ProfileMode::MonteCarlo;
        else invalid("unknown mode '" + mode + "'");
        cfg.samples = get_or<std::size_t>(doc, "samples", cfg.samples);
        cfg.master_seed = get_or<std::uint64_t>(doc, "master_seed", cfg.master_seed);
        cfg.retain_ops = get_or<bool>(doc, "retain_ops", cfg.retain_ops);
        cfg.atom_tol = get_or<double>(doc, "atom_tol", cfg.atom_tol);
        cfg.probes = get_or<std::size_t>(doc, "probes", cfg.probes);
        cfg.node_budget = get_or<std::size_t>(doc, "node_budget", cfg.node_budget);
        return cfg;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, e.what());
    }
}

Json ScenarioConfig::to_json() const
{
    Json doc;
    doc["dim"] = dim;

    Json r0j;
    r0j["type"] = r0_type_name(r0.type);
    switch (r0.type) {
    case R0Source::Type::Explicit: r0j["matrix"] = io::matrix_to_json(r0.matrix); break;
    case R0Source::Type::Identity: break;
    case R0Source::Type::IdentityOnSubspace:
        if (r0.basis.cols() > 0) {
            Json cols = Json::array();
            for (Index c = 0; c < r0.basis.cols(); ++c) cols.push_back(io::vector_to_json(r0.basis.col(c)));
            r0j["basis"] = std::move(cols);
        }
        r0j["rank"] = r0.rank;
        if (r0.seed) r0j["seed"] = *r0.seed;
        break;
    case R0Source::Type::RandomPsd:
        r0j["rank"] = r0.rank;
        r0j["trace"] = r0.trace;
        if (r0.seed) r0j["seed"] = *r0.seed;
        break;
    }
    doc["r0"] = std::move(r0j);

    Json pj;
    pj["type"] = proj_type_name(projections.type);
    pj["m"] = projections.m;
    if (projections.type == ProjectionSource::Type::Explicit) {
        Json mats = Json::array();
        for (const auto& p : projections.matrices) mats.push_back(io::matrix_to_json(p));
        pj["matrices"] = std::move(mats);
    }
    if (projections.type == ProjectionSource::Type::RandomUnstructured) {
        pj["ranks"] = projections.ranks;
        pj["blind"] = projections.blind;
    }
    if (projections.seed) pj["seed"] = *projections.seed;
    doc["projections"] = std::move(pj);

    Json mj;
    mj["kind"] = to_string(measure.kind);
    if (measure.x) mj["x"] = io::vector_to_json(*measure.x);
    if (!measure.q.empty()) mj["q"] = measure.q;
    mj["dead_tol"] = measure.dead_tol;
    doc["measure"] = std::move(mj);

    doc["depth"] = depth;
    if (max_depth) doc["max_depth"] = *max_depth;
    doc["stop_tol"] = stop_tol;
    doc["mode"] = to_string(mode);
    doc["samples"] = samples;
    doc["master_seed"] = master_seed;
    doc["retain_ops"] = retain_ops;
    doc["atom_tol"] = atom_tol;
    doc["probes"] = probes;
    doc["node_budget"] = node_budget;
    return doc;
}

void ScenarioConfig::resolve()
{
    if (!r0.seed && (r0.type == R0Source::Type::RandomPsd ||
                     (r0.type == R0Source::Type::IdentityOnSubspace && r0.basis.cols() == 0)))
        r0.seed = splitmix64(master_seed + 1);
    if (!projections.seed && (projections.type == ProjectionSource::Type::RandomSubspaceSplit ||
                              projections.type == ProjectionSource::Type::RandomUnstructured))
        projections.seed = splitmix64(master_seed + 2);
    if (projections.type == ProjectionSource::Type::RandomUnstructured && projections.ranks.empty() &&
        projections.m > 0) {
        const Index visible = dim - projections.blind;
        const Index r = std::max<Index>(1, visible / static_cast<Index>(projections.m));
        projections.ranks.assign(projections.m, std::min(r, std::max<Index>(visible, 1)));
    }
    if (!max_depth) max_depth = depth;
    if (measure.kind != MeasureKind::Trace && !measure.x && dim > 0) {
        StreamRng rng(splitmix64(master_seed + 3), 0);
        measure.x = gen::random_unit_vector(dim, rng);
    }
    if (measure.q.empty() && projections.m > 0)
        measure.q.assign(projections.m, 1.0 / static_cast<double>(projections.m));
}

void ScenarioConfig::validate() const
{
    if (dim < 1) invalid("dim must be positive");
    if (depth < 1) invalid("depth must be at least 1");
    if (max_depth && *max_depth < 1) invalid("max_depth must be at least 1");
    if (!(stop_tol >= 0.0)) invalid("stop_tol must be nonnegative");
    if (samples < 1) invalid("samples must be at least 1");
    if (!(atom_tol >= 0.0)) invalid("atom_tol must be nonnegative");
    if (projections.m < 1) invalid("need at least one projection");
    if (r0.type == R0Source::Type::Explicit && r0.matrix.rows() != dim) invalid("r0 matrix dim differs from dim");
    if (r0.type == R0Source::Type::IdentityOnSubspace && r0.basis.cols() == 0 && (r0.rank < 1 || r0.rank > dim))
        invalid("identity_on_subspace needs a basis or a rank in [1, dim]");
    if (r0.type == R0Source::Type::RandomPsd && (r0.rank < 1 || r0.rank > dim)) invalid("random_psd rank out of range");
    if (projections.type == ProjectionSource::Type::Explicit) {
        for (const auto& p : projections.matrices)
            if (p.rows() != dim) invalid("explicit projection dim differs from dim");
    }
    if ((projections.type == ProjectionSource::Type::CoordinateSplit ||
         projections.type == ProjectionSource::Type::RandomSubspaceSplit) &&
        static_cast<Index>(projections.m) > dim)
        invalid("splits need m <= dim");
    if (projections.type == ProjectionSource::Type::RandomUnstructured && !projections.ranks.empty() &&
        projections.ranks.size() != projections.m)
        invalid("random_unstructured needs one rank per projection");
    if (measure.x && measure.x->size() != dim) invalid("measure x has wrong length");
    if (!measure.q.empty() && measure.q.size() != projections.m) invalid("measure q needs m entries");
}

// ------------------------------------------------------------- instance --

Instance generate_instance(const ScenarioConfig& input)
{
    ScenarioConfig cfg = input;
    cfg.resolve();
    cfg.validate();

    Instance inst;
    Matrix r0;
    switch (cfg.r0.type) {
    case R0Source::Type::Explicit: r0 = cfg.r0.matrix; break;
    case R0Source::Type::Identity: r0 = Matrix::Identity(cfg.dim, cfg.dim); break;
    case R0Source::Type::IdentityOnSubspace:
        if (cfg.r0.basis.cols() > 0) {
            r0 = gen::projection_onto(cfg.r0.basis);
        } else {
            StreamRng rng(*cfg.r0.seed, 0);
            r0 = gen::random_subspace_projection(cfg.dim, cfg.r0.rank, rng);
        }
        break;
    case R0Source::Type::RandomPsd: {
        StreamRng rng(*cfg.r0.seed, 0);
        r0 = gen::random_psd(cfg.dim, cfg.r0.rank, cfg.r0.trace, rng);
        break;
    }
    }
    inst.r0 = validate_psd(HermitianOperator::from_matrix(r0));

    std::vector<Matrix> projections;
    switch (cfg.projections.type) {
    case ProjectionSource::Type::Explicit: projections = cfg.projections.matrices; break;
    case ProjectionSource::Type::CoordinateSplit:
        projections = gen::coordinate_split(cfg.dim, cfg.projections.m);
        break;
    case ProjectionSource::Type::RandomSubspaceSplit: {
        StreamRng rng(*cfg.projections.seed, 0);
        projections = gen::random_subspace_split(cfg.dim, cfg.projections.m, rng);
        break;
    }
    case ProjectionSource::Type::RandomUnstructured: {
        StreamRng rng(*cfg.projections.seed, 0);
        projections = gen::random_unstructured(cfg.dim, cfg.projections.ranks, cfg.projections.blind, rng);
        break;
    }
    }
    inst.family = ProjectionFamily::build(projections, inst.r0);

    MeasureSpec spec;
    spec.kind = cfg.measure.kind;
    if (cfg.measure.x) spec.x = *cfg.measure.x;
    spec.q = cfg.measure.q;
    spec.dead_tol = cfg.measure.dead_tol;
    TreeCache probe(inst.r0, inst.family);
    spec.validate(probe);
    inst.spec = std::move(spec);

    if (inst.family.alpha() <= 1e-12 && !inst.r0.is_zero())
        inst.warnings.push_back("alpha = 0: a direction of H0 is blind to every projection; extinction is not "
                                "guaranteed");
    return inst;
}

// -------------------------------------------------------------- writers --

std::string levels_csv(const std::vector<LevelStats>& levels)
{
    std::ostringstream out;
    out << "n,expectation,bound,std_error,mode\n";
    for (const auto& l : levels)
        out << l.n << ',' << fmt_double(l.expected_value) << ','
            << fmt_double(l.bound.value_or(std::numeric_limits<double>::quiet_NaN())) << ','
            << fmt_double(l.std_error) << ',' << to_string(l.mode) << '\n';
    return out.str();
}

std::string samples_csv(const std::vector<BranchSample>& samples, std::size_t m)
{
    std::ostringstream out;
    out << "sample,word,stopping_depth,final_residual,stopped_reason\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        out << i << ",\"" << s.letters.to_string(m) << "\"," << s.depth() << ',' << fmt_double(s.final_residual())
            << ',' << to_string(s.stopped_reason) << '\n';
    }
    return out.str();
}

std::string balance_csv(const EnergyBalance& balance)
{
    std::ostringstream out;
    out << "n,expected_residual,expected_dissipation,tail_rhs,tail_defect\n";
    for (const auto& l : balance.levels)
        out << l.n << ',' << fmt_double(l.expected_residual) << ',' << fmt_double(l.expected_dissipation) << ','
            << fmt_double(l.tail_rhs) << ',' << fmt_double(l.tail_defect) << '\n';
    return out.str();
}

Json frame_json(const AtomSystem& system, std::size_t m, std::uint64_t seed, const Json& verification)
{
    Json doc;
    Json header;
    header["dim"] = system.dim;
    header["m"] = m;
    header["seed"] = seed;
    header["depth"] = system.depth;
    header["residual_trace_at_stop"] = system.residual_trace_at_stop;
    header["atom_tol"] = system.atom_tol;
    header["truncated_mass"] = system.truncated_mass;
    header["extinct"] = system.extinct;
    doc["header"] = std::move(header);
    Json atoms = Json::array();
    for (const auto& a : system.atoms) {
        Json aj;
        aj["k"] = a.step;
        aj["r"] = a.rank_index;
        aj["lambda"] = a.lambda;
        aj["vector"] = io::vector_to_json(a.phi);
        aj["source_word"] = a.source_word.to_string(m);
        atoms.push_back(std::move(aj));
    }
    doc["atoms"] = std::move(atoms);
    doc["verification"] = verification;
    return doc;
}

// -------------------------------------------------------------- pipeline --

namespace {

constexpr double kCheckTol = 1e-10;

class Pipeline {
public:
    Pipeline(ScenarioConfig cfg, std::string command, RunOptions opts)
        : cfg_(std::move(cfg)), command_(std::move(command)), opts_(opts)
    {
    }

    ReportBundle run()
    {
        static const std::vector<std::string> known{"simulate", "enumerate", "frame", "alpha", "check"};
        if (std::find(known.begin(), known.end(), command_) == known.end())
            invalid("unknown command '" + command_ + "'");

        cfg_.resolve();
        cfg_.validate();
        bundle_.command = command_;
        const Json resolved = cfg_.to_json();
        bundle_.run_id = hex64(fnv1a(command_ + "\n" + resolved.dump()));

        const bool wants_exhaustive = command_ == "enumerate" ||
                                      (command_ == "simulate" && cfg_.mode == ProfileMode::Exhaustive);
        if (wants_exhaustive) require_budget(cfg_.depth);

        inst_ = generate_instance(cfg_);
        root_scale_ = inst_.spec.scale(inst_.r0);

        bundle_.summary["command"] = command_;
        bundle_.summary["run_id"] = bundle_.run_id;
        bundle_.summary["config"] = resolved;
        bundle_.summary["instance"] = instance_json();

        if (command_ == "alpha") run_alpha();
        if (command_ == "enumerate") run_enumerate();
        if (command_ == "simulate") run_simulate();
        if (command_ == "frame") run_frame();
        if (command_ == "check") run_check();

        Json checks = Json::array();
        for (const auto& c : bundle_.checks) {
            checks.push_back(Json{{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
            bundle_.all_pass = bundle_.all_pass && c.pass;
        }
        bundle_.summary["checks"] = std::move(checks);
        bundle_.summary["all_pass"] = bundle_.all_pass;
        bundle_.files["summary.json"] = bundle_.summary.dump(2) + "\n";
        return std::move(bundle_);
    }

private:
    void require_budget(std::size_t depth) const
    {
        double count = 1.0;
        for (std::size_t k = 0; k < depth; ++k) count *= static_cast<double>(cfg_.projections.m);
        if (count > static_cast<double>(cfg_.node_budget))
            throw Error(ErrorKind::BudgetExceeded, "m^depth = " + fmt_double(count) + " exceeds node budget " +
                                                       std::to_string(cfg_.node_budget));
    }

    bool exhaustive_feasible(std::size_t depth) const
    {
        try {
            require_budget(depth);
            return true;
        } catch (const Error&) {
            return false;
        }
    }

    TreeCache make_cache() const { return TreeCache(inst_.r0, inst_.family, CachePolicy::PathLocal, cfg_.node_budget); }

    void add_check(std::string name, double value, double threshold)
    {
        bundle_.checks.push_back(CheckResult{std::move(name), value, threshold, value <= threshold});
    }

    Json instance_json() const
    {
        Json j;
        j["dim"] = inst_.r0.dim();
        j["m"] = inst_.family.size();
        j["alpha"] = inst_.family.alpha();
        j["contraction"] = inst_.family.contraction();
        j["splitting"] = inst_.family.splitting();
        j["splitting_defect"] = inst_.family.splitting_defect();
        j["h0_rank"] = inst_.family.h0_basis().cols();
        j["root_trace"] = inst_.r0.trace();
        j["root_scale"] = inst_.spec.scale(inst_.r0);
        j["measure"] = to_string(inst_.spec.kind);
        j["warnings"] = inst_.warnings;
        return j;
    }

    void run_alpha()
    {
        const double m = static_cast<double>(inst_.family.size());
        add_check("alpha_range", std::max(-inst_.family.alpha(), inst_.family.alpha() - m), 0.0);
    }

    void run_enumerate()
    {
        TreeCache cache = make_cache();
        const auto& spec = inst_.spec;
        const std::size_t depth = cfg_.depth;
        const double slack = kCheckTol * root_scale_;

        const auto profile = expectation_profile(cache, spec, depth, ProfileOptions{});
        bundle_.files["levels.csv"] = levels_csv(profile);
        Json prof = Json::array();
        for (const auto& l : profile) prof.push_back(l.expected_value);
        bundle_.summary["profile"] = prof;

        const auto level = enumerate_level(cache, spec, depth);
        std::ostringstream words;
        words << "word,probability,value\n";
        double weight_sum = 0.0;
        for (const auto& e : level) {
            words << '"' << e.word.to_string(cache.m()) << "\"," << fmt_double(e.probability) << ','
                  << fmt_double(e.value) << '\n';
            weight_sum += e.probability;
        }
        bundle_.files["words.csv"] = words.str();
        add_check("level_weights_sum", std::abs(weight_sum - 1.0), 1e-10);
        add_check("cylinder_consistency", cylinder_consistency_defect(cache, spec, depth), 1e-12);

        const auto sm = conditional_supermartingale_check(cache, spec, depth - 1);
        add_check("supermartingale", sm.max_violation, slack);
        if (spec.kind != MeasureKind::ResidualBinary) {
            add_check("node_contraction", sm.max_contraction_violation, slack);
            double worst = -std::numeric_limits<double>::infinity();
            for (std::size_t n = 0; n + 1 < profile.size(); ++n)
                worst = std::max(worst, profile[n + 1].expected_value -
                                            inst_.family.contraction() * profile[n].expected_value);
            add_check("level_contraction", worst, slack);
        }

        if (spec.kind == MeasureKind::Energy) {
            const auto balance = energy_balance_report(cache, spec, depth, ProfileOptions{});
            bundle_.files["balance.csv"] = balance_csv(balance);
            bundle_.summary["energy_balance"] = Json{{"root_energy", balance.root_energy},
                                                     {"dissipated", balance.dissipated_total},
                                                     {"residual_interval", {0.0, balance.residual_upper}},
                                                     {"defect", balance.defect}};
            add_check("energy_balance", std::abs(balance.defect), slack);
            double tail = 0.0;
            for (const auto& l : balance.levels) tail = std::max(tail, std::abs(l.tail_defect));
            add_check("tail_identity", tail, slack);
        }

        if (cache.m() == 2 && inst_.family.splitting() && spec.uses_state()) {
            const auto bin = binary_conjugacy_check(cache, spec, depth);
            add_check("binary_cross_identity", bin.cross_identity, 1e-12);
            add_check("residual_additivity", bin.residual_additivity, 1e-12);
            add_check("measure_conjugacy", bin.conjugacy, 1e-12);
        }
    }

    std::vector<BranchSample> draw_samples(bool retain) const
    {
        const SampleOptions sopts{cfg_.sampling_depth(), cfg_.stop_tol, retain};
        return sample_branches(inst_.r0, inst_.family, inst_.spec, sopts, cfg_.master_seed, cfg_.samples,
                               opts_.threads);
    }

    void run_simulate()
    {
        const auto samples = draw_samples(false);
        bundle_.files["samples.csv"] = samples_csv(samples, inst_.family.size());

        double mono = 0.0, tele = 0.0;
        for (const auto& s : samples) {
            const auto c = check_sample(s);
            mono = std::max(mono, c.monotonicity_violation);
            tele = std::max(tele, c.telescoping_defect);
        }
        add_check("path_monotonicity", mono, kCheckTol);
        add_check("path_telescoping", tele, kCheckTol);

        const std::optional<double> c = inst_.spec.kind == MeasureKind::ResidualBinary
                                            ? std::nullopt
                                            : std::optional<double>(inst_.family.contraction());
        const auto ext = extinction_stats(samples, cfg_.stop_tol, c);
        Json hist = Json::object();
        for (const auto& [d, count] : ext.depth_histogram) hist[std::to_string(d)] = count;
        Json ej;
        ej["samples"] = ext.n_samples;
        ej["extinct"] = ext.extinct;
        ej["extinct_fraction"] = ext.extinct_fraction;
        ej["depth_histogram"] = std::move(hist);
        ej["rate_slope"] = ext.rate_slope ? Json(*ext.rate_slope) : Json(nullptr);
        ej["log_contraction"] = ext.log_contraction ? Json(*ext.log_contraction) : Json(nullptr);
        ej["fit_levels"] = ext.fit_levels;
        bundle_.summary["extinction"] = std::move(ej);

        std::vector<LevelStats> levels;
        if (cfg_.mode == ProfileMode::Exhaustive && exhaustive_feasible(cfg_.depth)) {
            TreeCache cache = make_cache();
            levels = expectation_profile(cache, inst_.spec, cfg_.depth, ProfileOptions{});
        } else {
            levels = level_stats_from_samples(samples, cfg_.sampling_depth(), c);
            double worst = -std::numeric_limits<double>::infinity();
            for (const auto& l : levels)
                if (l.bound) worst = std::max(worst, l.expected_value - *l.bound - 4.0 * l.std_error);
            if (c) add_check("mc_level_bound", worst, kCheckTol * root_scale_ + cfg_.stop_tol * root_scale_);
        }
        bundle_.files["levels.csv"] = levels_csv(levels);
    }

    void run_frame()
    {
        TreeCache cache = make_cache();
        const BranchSample branch =
            sample_branch(cache, inst_.spec, SampleOptions{cfg_.sampling_depth(), cfg_.stop_tol, true},
                          cfg_.master_seed, 0);
        const AtomSystem sys = branch_atoms(cache, branch, cfg_.atom_tol, cfg_.stop_tol);

        StreamRng probe_rng(splitmix64(cfg_.master_seed + 4), 0);
        double worst_parseval = 0.0, worst_excess = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cfg_.probes; ++i) {
            const Vector x = gen::random_unit_vector(inst_.r0.dim(), probe_rng);
            const auto d = parseval_defect(sys, x, inst_.r0);
            const double allowed = d.bound + (sys.extinct ? sys.residual_trace_at_stop : 0.0);
            worst_parseval = std::max(worst_parseval, d.headline);
            worst_excess = std::max(worst_excess, d.headline - allowed);
        }
        if (cfg_.probes > 0) add_check("parseval", worst_excess, 0.0);

        const double r0_norm = inst_.r0.matrix().norm();
        const double frame_defect = frame_operator_defect(sys);
        add_check("frame_operator", frame_defect,
                  tol::kRecon * static_cast<double>(sys.depth) * r0_norm + sys.truncated_mass);

        const Matrix& h0 = inst_.family.h0_basis();
        double membership = 0.0;
        for (const auto& a : sys.atoms) {
            const double kept = (h0.adjoint() * a.phi).norm() / a.phi.norm();
            membership = std::max(membership, 1.0 - kept);
        }
        add_check("atom_membership", membership, 1e-8);

        Json verification;
        verification["max_parseval_defect"] = worst_parseval;
        verification["probes"] = cfg_.probes;
        verification["frame_operator_defect"] = frame_defect;
        if (sys.extinct) {
            const double span = span_defect(sys, h0);
            verification["span_defect"] = span;
            add_check("span", span, 1e-6);
        } else {
            verification["span_defect"] = nullptr;
        }
        verification["stopped_reason"] = to_string(branch.stopped_reason);
        bundle_.files["frame.json"] = frame_json(sys, inst_.family.size(), cfg_.master_seed, verification).dump(2) + "\n";
        bundle_.summary["frame"] = Json{{"atoms", sys.atoms.size()},
                                        {"depth", sys.depth},
                                        {"extinct", sys.extinct},
                                        {"residual_trace_at_stop", sys.residual_trace_at_stop},
                                        {"verification", verification}};
    }

    void run_check()
    {
        // One-step algebra and chain monotonicity along a few sampled paths.
        const auto samples = draw_samples(false);
        TreeCache cache = make_cache();
        const double r0_norm = inst_.r0.matrix().norm();
        double algebra = 0.0, cone = 0.0, tele = 0.0;
        const std::size_t paths = std::min<std::size_t>(samples.size(), 8);
        for (std::size_t i = 0; i < paths; ++i) {
            const Word& w = samples[i].letters;
            for (std::size_t k = 0; k <= w.size(); ++k) {
                const PsdOperator r = cache.residual(w.prefix(k));
                const double rn = std::max(r.matrix().norm(), std::numeric_limits<double>::min());
                for (std::size_t j = 0; j < inst_.family.size(); ++j) {
                    const PsdOperator next = wr_update(r, inst_.family[j]);
                    const PsdOperator d = dissipated(r, inst_.family[j]);
                    algebra = std::max(algebra, (r.matrix() - next.matrix() - d.matrix()).norm() / rn);
                    const double scale = std::max(r.norm(), std::numeric_limits<double>::min());
                    cone = std::max(cone, -min_eigenvalue(next.matrix()) / scale);
                    cone = std::max(cone, -min_eigenvalue(r.matrix() - next.matrix()) / scale);
                }
            }
            tele = std::max(tele, branch_telescoping_defect(cache, w) / std::max(r0_norm, 1e-300));
        }
        add_check("one_step_identity", algebra, kCheckTol);
        add_check("loewner_cone", cone, kCheckTol);
        add_check("branch_telescoping", tele, tol::kRecon);

        run_simulate();
        if (exhaustive_feasible(cfg_.depth)) {
            run_enumerate();
            if (cfg_.mode == ProfileMode::MonteCarlo) {
                TreeCache ex_cache = make_cache();
                const auto exact = expectation_profile(ex_cache, inst_.spec, cfg_.depth, ProfileOptions{});
                const auto mc = expectation_profile(
                    ex_cache, inst_.spec, cfg_.depth,
                    ProfileOptions{ProfileMode::MonteCarlo, cfg_.samples, cfg_.master_seed, opts_.threads});
                double worst = -std::numeric_limits<double>::infinity();
                for (std::size_t n = 0; n < exact.size(); ++n)
                    worst = std::max(worst, std::abs(mc[n].expected_value - exact[n].expected_value) -
                                                4.0 * mc[n].std_error);
                add_check("monte_carlo_vs_exhaustive", worst, kCheckTol * root_scale_);
            }
        } else {
            bundle_.summary["exhaustive_skipped"] = "m^depth exceeds node budget";
        }
        if (cfg_.retain_ops && !inst_.r0.is_zero()) run_frame();
    }

    ScenarioConfig cfg_;
    std::string command_;
    RunOptions opts_;
    Instance inst_;
    double root_scale_ = 0.0;
    ReportBundle bundle_;
};

} // namespace

ReportBundle run_scenario(ScenarioConfig cfg, const std::string& command, const RunOptions& opts)
{
    return Pipeline(std::move(cfg), command, opts).run();
}

std::string write_bundle(const ReportBundle& bundle, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(out_dir) / bundle.run_id;
    fs::create_directories(dir);
    for (const auto& [name, contents] : bundle.files) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + (dir / name).string());
        f << contents;
    }
    return dir.string();
}

} // namespace wrflow
