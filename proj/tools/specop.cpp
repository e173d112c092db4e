// specop: analyze | eigen | project | verify on a JSON problem file.
#include "specop/acceptance.hpp"
#include "specop/oracle.hpp"
#include "specop/ode_core.hpp"
#include "specop/transforms.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace specop;

namespace {

struct RunConfig {
    std::string spec_path;
    std::string command = "analyze";
    int n = 4;
    std::optional<double> half_width;
    std::optional<int> points;
    double lambda_max = 5000.0;
    std::string out = ".";
    std::uint64_t seed = 1;
    std::string input = "gaussian";
    std::vector<std::string> intervals;
};

// Errors in the input or in the operator hypotheses exit with 2, numerical ones with 3.
int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::spec_invalid:
    case ErrorKind::non_positive_d2:
    case ErrorKind::domain:
    case ErrorKind::endpoint_on_spectrum: return 2;
    default: return 3;
    }
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Context {
    RunConfig cfg;
    ProblemSpec problem;
    std::string hash;
    Grid grid;
};

json header(const Context& ctx) { return {{"tool", "specop"}, {"version", version}, {"spec_hash", ctx.hash}}; }

std::ofstream open_out(const Context& ctx, const std::string& name) {
    fs::create_directories(ctx.cfg.out);
    std::ofstream os(fs::path(ctx.cfg.out) / name);
    if (!os) fail(ErrorKind::spec_invalid, "cannot write " + name + " in " + ctx.cfg.out);
    return os;
}

std::ofstream open_csv(const Context& ctx, const std::string& name, const std::string& columns) {
    auto os = open_out(ctx, name);
    os << "# specop " << version << " spec_hash " << ctx.hash << "\n" << columns << "\n";
    return os;
}

void write_json(const Context& ctx, const std::string& name, json body) {
    json doc{{"header", header(ctx)}};
    for (auto& [k, v] : body.items()) doc[k] = std::move(v);
    open_out(ctx, name) << doc.dump(2) << "\n";
}

json intervals_json(const IntervalUnion& u) {
    json a = json::array();
    for (const auto& iv : u.parts()) a.push_back({iv.lo, iv.hi});
    return a;
}

struct Pipeline {
    double lambda_s = 0.0;
    std::optional<GridOperator> go;
    std::vector<WSample> sweep;
    std::vector<Eigenpair> eigs;
};

// Sweep from below the lowest grid eigenvalue up to `hi`, then reconcile eigenvalues.
Pipeline run_pipeline(const Context& ctx, double hi) {
    const auto& op = ctx.problem.op;
    check_hypotheses(op, ctx.grid.half_width, 4001);
    Pipeline p;
    p.lambda_s = select_lambda_s(op, ctx.grid.half_width).lambda_s;
    p.go = discretize(op, ctx.grid.half_width, ctx.grid.points);
    double lo = std::min(-1.5, p.go->lambda_values().front() - 0.5);
    SweepOptions opt;
    opt.n_index = ctx.cfg.n;
    Grid sweep_grid{ctx.grid.half_width, std::max(ctx.grid.points / 2, 200)};
    p.sweep = adaptive_W_sweep(op, lo, std::max(hi, p.lambda_s), sweep_grid, opt);
    auto roots = W_roots(op, p.sweep, sweep_grid);
    p.eigs = find_eigenvalues(*p.go, lo, p.lambda_s, roots);
    return p;
}

json eigen_json(const std::vector<Eigenpair>& eigs) {
    json a = json::array();
    for (const auto& e : eigs)
        a.push_back({{"lambda", e.lambda},
                     {"grid_lambda", num_or_null(e.grid_lambda)},
                     {"w_root", num_or_null(e.w_root)},
                     {"multiplicity", e.multiplicity},
                     {"residual", e.residual},
                     {"source", std::string(to_string(e.source))},
                     {"confirmed", e.confirmed}});
    return a;
}

RVec input_function(const Context& ctx, const std::vector<Eigenpair>& eigs) {
    const std::string& name = ctx.cfg.input;
    if (name == "gaussian") return sample(ctx.grid, [](double x) { return std::exp(-x * x / 2); });
    if (name == "shifted_gaussian") return sample(ctx.grid, [](double x) { return std::exp(-(x - 1) * (x - 1)); });
    if (name == "eigenmode") {
        if (eigs.empty()) fail(ErrorKind::spec_invalid, "--f eigenmode: the operator has no eigenvalue");
        return eigs.front().xi[0];
    }
    fail(ErrorKind::spec_invalid, "--f: unknown preset '" + name + "'");
}

int cmd_eigen(const Context& ctx) {
    auto p = run_pipeline(ctx, 0.0);
    write_json(ctx, "eigenvalues.json", {{"lambda_s", p.lambda_s}, {"eigenvalues", eigen_json(p.eigs)}});
    return 0;
}

int cmd_analyze(const Context& ctx) {
    double lmax = ctx.cfg.lambda_max;
    auto p = run_pipeline(ctx, lmax);

    auto w = open_csv(ctx, "W_sweep.csv", "lambda,ReW_plus,ImW_plus,ReW_minus,ImW_minus,in_M_n");
    for (const auto& s : p.sweep)
        w << num(s.lambda) << "," << num(s.w_plus.real()) << "," << num(s.w_plus.imag()) << ","
          << num(s.w_minus.real()) << "," << num(s.w_minus.imag()) << "," << (s.in_M ? 1 : 0) << "\n";

    write_json(ctx, "eigenvalues.json", {{"lambda_s", p.lambda_s}, {"eigenvalues", eigen_json(p.eigs)}});

    auto part = partition(ctx.problem.op, ctx.cfg.n, p.sweep, p.eigs, p.lambda_s, lmax);
    json dips = json::array();
    for (const auto& d : part.dips) dips.push_back({d.lo, d.hi});
    write_json(ctx, "partition.json",
               {{"n", part.n},
                {"lambda_s", part.lambda_s},
                {"lambda_0", part.lambda_0},
                {"lambda_max", part.lambda_max},
                {"N_n", intervals_json(part.N_n)},
                {"M_n", intervals_json(part.M_n)},
                {"zeros", part.zeros},
                {"guards", part.guards},
                {"dips", dips}});

    BasisOptions bopt;
    bopt.n_index = ctx.cfg.n;
    auto basis = SpectralBasis::build(ctx.problem.op, ctx.grid, part, p.eigs, bopt);
    RVec f = input_function(ctx, p.eigs);
    auto td = analyze(basis, f);
    auto t = open_csv(ctx, "transforms.csv", "lambda,ReT1,ImT1,ReT2,ImT2,ReS1,ImS1,ReS2,ImS2");
    for (std::size_t k = 0; k < td.nodes.size(); ++k) {
        t << num(td.nodes[k].lambda);
        for (const auto* v : {&td.T[0], &td.T[1], &td.S[0], &td.S[1]}) t << "," << num((*v)[k]) << ",0";
        t << "\n";
    }
    std::cerr << "analyze: " << p.eigs.size() << " eigenvalue(s), " << td.nodes.size()
              << " lambda nodes, tail bound " << td.tail_bound << "\n";
    return 0;
}

int cmd_project(const Context& ctx) {
    IntervalUnion b;
    for (const auto& text : ctx.cfg.intervals) {
        auto piece = IntervalUnion::parse(text);
        for (const auto& iv : piece.parts())
            if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
                fail(ErrorKind::spec_invalid, "--interval: endpoints must be finite");
        b = b.unite(piece);
    }
    double top = 0.0;
    for (const auto& iv : b.parts()) top = std::max(top, iv.hi);
    double lmax = std::max(ctx.cfg.lambda_max, top);

    auto p = run_pipeline(ctx, lmax);
    auto part = partition(ctx.problem.op, ctx.cfg.n, p.sweep, p.eigs, p.lambda_s, lmax);
    BasisOptions bopt;
    bopt.n_index = ctx.cfg.n;
    auto basis = SpectralBasis::build(ctx.problem.op, ctx.grid, part, p.eigs, bopt);
    RVec f = input_function(ctx, p.eigs);
    auto ours = spectral_projection(basis, b, f);
    auto oracle = oracle_projection(*p.go, b, f);

    double scale = 0.0;
    for (double v : oracle) scale = std::max(scale, std::abs(v));
    auto os = open_csv(ctx, "projection.csv", "x,E_b_f,oracle,deviation");
    for (int i = 0; i < ctx.grid.points; ++i) {
        double dev = scale > 0.0 ? std::abs(ours[i] - oracle[i]) / scale : std::abs(ours[i]);
        os << num(ctx.grid.x(i)) << "," << num(ours[i]) << "," << num(oracle[i]) << "," << num(dev) << "\n";
    }
    double h = ctx.grid.step();
    std::cerr << "project: b = " << b.str() << ", relative L2 deviation from oracle "
              << distance(ours, oracle, h) / std::max(norm(oracle, h), 1e-300) << "\n";
    return 0;
}

int cmd_verify(const Context& ctx) {
    AcceptanceConfig acfg;
    acfg.half_width = ctx.grid.half_width;
    acfg.points = ctx.grid.points;
    acfg.n_index = ctx.cfg.n;
    acfg.lambda_max = ctx.cfg.lambda_max;
    acfg.seed = ctx.cfg.seed;
    json criteria = json::array();
    bool all = true;
    run_acceptance(acfg, [&](const CriterionResult& r) {
        std::cerr << summary_line(r) << "\n";
        all = all && r.pass();
        json checks = json::array();
        for (const auto& c : r.checks)
            checks.push_back({{"name", c.name},
                              {"value", num_or_null(c.value)},
                              {"limit", c.relation.empty() ? json(nullptr) : json(c.limit)},
                              {"relation", c.relation},
                              {"pass", c.pass}});
        json item{{"id", r.id}, {"name", r.name}, {"pass", r.pass()}, {"checks", checks}};
        if (!r.error.empty()) item["error"] = r.error;
        criteria.push_back(item);
    });
    write_json(ctx, "verify_report.json",
               {{"config",
                 {{"half_width", acfg.half_width},
                  {"points", acfg.points},
                  {"n", acfg.n_index},
                  {"lambda_max", acfg.lambda_max},
                  {"seed", acfg.seed}}},
                {"all_pass", all},
                {"criteria", criteria}});
    return all ? 0 : 1;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::spec_invalid, "--spec: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run(const RunConfig& cfg) {
    Context ctx;
    ctx.cfg = cfg;
    ctx.problem = parse_problem(read_file(cfg.spec_path));
    if (cfg.half_width) ctx.problem.grid.half_width = *cfg.half_width;
    if (cfg.points) ctx.problem.grid.points = *cfg.points;
    if (!(ctx.problem.grid.half_width > 0.0)) fail(ErrorKind::spec_invalid, "--half-width: must be positive");
    if (ctx.problem.grid.points < 2) fail(ErrorKind::spec_invalid, "--points: must be at least 2");
    if (cfg.n < 1) fail(ErrorKind::spec_invalid, "--n: must be at least 1");
    if (!(cfg.lambda_max > 0.0)) fail(ErrorKind::spec_invalid, "--lambda-max: must be positive");
    validate(ctx.problem.op);
    ctx.hash = spec_hash(ctx.problem);
    ctx.grid = {ctx.problem.grid.half_width, ctx.problem.grid.points};

    if (cfg.command == "analyze") return cmd_analyze(ctx);
    if (cfg.command == "eigen") return cmd_eigen(ctx);
    if (cfg.command == "project") return cmd_project(ctx);
    return cmd_verify(ctx);
}

void report_error(std::string_view kind, const std::string& message, int code) {
    json e{{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << e.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral analysis of fourth-order operator pairs D2 D1"};
    RunConfig cfg;
    app.add_option("--spec", cfg.spec_path, "problem JSON")->required();
    app.add_option("--cmd", cfg.command, "command")
        ->check(CLI::IsMember({"analyze", "verify", "project", "eigen"}))
        ->capture_default_str();
    app.add_option("--n", cfg.n, "partition index")->capture_default_str();
    app.add_option("--half-width", cfg.half_width, "box half-width X (overrides the spec)");
    app.add_option("--points", cfg.points, "interior grid points N (overrides the spec)");
    app.add_option("--lambda-max", cfg.lambda_max, "upper end of the continuous part")->capture_default_str();
    app.add_option("--out", cfg.out, "output directory")->capture_default_str();
    app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    app.add_option("--f", cfg.input, "input function: gaussian | shifted_gaussian | eigenmode")
        ->check(CLI::IsMember({"gaussian", "shifted_gaussian", "eigenmode"}))
        ->capture_default_str();
    app.add_option("--interval", cfg.intervals, "spectral set for --cmd project, \"a:b[,c:d]\"; repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("UsageError", e.what(), 2);
        return 2;
    }

    try {
        return run(cfg);
    } catch (const Error& e) {
        int code = exit_code(e.kind());
        report_error(to_string(e.kind()), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        report_error("InternalError", e.what(), 3);
        return 3;
    }
}
