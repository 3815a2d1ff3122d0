#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hosf/decomp.hpp"
#include "hosf/density.hpp"
#include "hosf/error.hpp"
#include "hosf/io.hpp"
#include "hosf/moments.hpp"
#include "hosf/pipeline.hpp"
#include "hosf/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace hosf;

namespace {

enum Exit
{
    kOk = 0,
    kUnexpected = 1,
    kValidation = 2,
    kNumeric = 3,
    kGate = 4,
};

struct Context
{
    std::string workdir = ".";

    fs::path path(std::string const& p) const
    {
        fs::path const q(p);
        return q.is_absolute() ? q : fs::path(workdir) / q;
    }
};

Json tensor_json(DenseTensor const& t)
{
    std::vector<std::size_t> dims;
    for (std::size_t k = 0; k < t.order(); ++k)
        dims.push_back(t.dim(k));
    return {{"dims", dims}, {"values", t.values()}};
}

char const* oracle_name(ExpectationMethod m)
{
    switch (m)
    {
        case ExpectationMethod::analytic: return "analytic";
        case ExpectationMethod::quadrature: return "quadrature";
        case ExpectationMethod::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

//---------------------------------------------------------------------------//

struct ScoreEvalArgs
{
    std::string model;
    std::string points;
    std::size_t order = 1;
    std::string method = "recursion";
    std::string out = "scores.json";
};

int score_eval(Context const& ctx, ScoreEvalArgs const& a)
{
    auto const model = model_from_json(load_json(ctx.path(a.model)));
    auto const pts = read_points(ctx.path(a.points));
    ScoreOrder const m(a.order);
    Json scores = Json::array();
    for (std::size_t i = 0; i < pts.rows; ++i)
    {
        try
        {
            auto const s = a.method == "explicit" ? score_explicit(model, pts.row(i), m)
                                                  : score(model, pts.row(i), m);
            scores.push_back(tensor_json(s));
        }
        catch (DegeneratePointError const& e)
        {
            throw DegeneratePointError(e.what(), i);
        }
    }
    save_json(ctx.path(a.out), {{"order", a.order}, {"method", a.method}, {"scores", scores}});
    std::printf("wrote %zu scores of order %zu to %s\n", pts.rows, a.order, a.out.c_str());
    return kOk;
}

struct MomentArgs
{
    std::string model;
    std::string data;
    std::size_t order = 3;
    std::size_t workers = 0;
    std::string out = "moment.stn1";
    std::string se_out;
};

int moment(Context const& ctx, MomentArgs const& a)
{
    auto const model = model_from_json(load_json(ctx.path(a.model)));
    auto const data = read_dataset(ctx.path(a.data));
    auto const est = cross_moment(data, model, ScoreOrder(a.order), a.workers);
    save_stn1(ctx.path(a.out), est.value);
    if (!a.se_out.empty())
        save_stn1(ctx.path(a.se_out), est.std_error);
    double se_max = 0.0;
    for (double s : est.std_error.values())
        se_max = std::max(se_max, s);
    std::printf("cross-moment of order %zu over %zu rows, max standard error %.6g\n",
                est.value.order(), est.n, se_max);
    return kOk;
}

struct SteinArgs
{
    std::string model;
    std::string g;
    std::size_t order = 1;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    double se_gate = 5.0;
    std::string out = "stein.json";
};

int stein_check(Context const& ctx, SteinArgs const& a)
{
    auto const model = model_from_json(load_json(ctx.path(a.model)));
    auto const g = poly_from_json(load_json(ctx.path(a.g)));
    auto const r = stein_residual(model, g, ScoreOrder(a.order), a.samples, a.seed, a.workers);
    bool const ok = r.passes(a.se_gate);
    save_json(ctx.path(a.out),
              {{"oracle", oracle_name(r.oracle)},
               {"max_abs_gap", r.max_abs_gap},
               {"max_gap_in_se", std::isfinite(r.max_gap_in_se) ? Json(r.max_gap_in_se) : Json("inf")},
               {"se_gate", a.se_gate},
               {"passes", ok},
               {"lhs", tensor_json(r.lhs.value)},
               {"std_error", tensor_json(r.lhs.std_error)},
               {"rhs", tensor_json(r.rhs)}});
    std::printf("stein gap %.6g (%.3g se, %s oracle): %s\n", r.max_abs_gap, r.max_gap_in_se,
                oracle_name(r.oracle), ok ? "PASS" : "FAIL");
    return ok ? kOk : kGate;
}

struct DecomposeArgs
{
    std::string tensor;
    std::string m2;
    DecompConfig cfg;
    std::string init = "random";
    std::string out = "components.json";
};

int decompose_cmd(Context const& ctx, DecomposeArgs a)
{
    a.cfg.init = a.init == "svd" ? InitMethod::svd : InitMethod::random;
    auto const t = load_stn1(ctx.path(a.tensor));
    DecompositionResult r;
    int code = kOk;
    try
    {
        if (t.order() == 2)
        {
            for (auto& p : matrix_decompose(t, a.cfg.k))
                r.components.push_back({p.value, std::move(p.vector)});
            r.candidates_kept = r.components.size();
        }
        else if (!a.m2.empty())
        {
            r = decompose_whitened(t, load_stn1(ctx.path(a.m2)), a.cfg);
        }
        else
        {
            r = decompose(t, a.cfg);
        }
    }
    catch (PartialResultError const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        r = e.partial();
        code = kNumeric;
    }
    save_json(ctx.path(a.out), decomposition_to_json(r));
    std::printf("%zu components, residual %.6g\n", r.components.size(), r.residual_fro);
    for (auto const& c : r.components)
        std::printf("  weight %.10g\n", c.weight);
    return code;
}

struct Gates
{
    std::optional<double> max_recovery_error;
    bool require_stein = false;
    bool require_signal = false;
};

int check_gates(PipelineReport const& r, Gates const& g)
{
    bool ok = true;
    if (g.max_recovery_error && !(r.max_recovery_error() <= *g.max_recovery_error))
    {
        std::printf("gate: recovery error %.6g exceeds %.6g\n", r.max_recovery_error(), *g.max_recovery_error);
        ok = false;
    }
    if (g.require_stein && !(r.stein && r.stein->passes()))
    {
        std::printf("gate: stein check did not pass\n");
        ok = false;
    }
    if (g.require_signal && r.no_signal)
    {
        std::printf("gate: no signal above noise\n");
        ok = false;
    }
    return ok ? kOk : kGate;
}

int finish_pipeline(Context const& ctx, std::string const& out, PipelineReport const& r, Gates const& g)
{
    write_pipeline_outputs(r, ctx.path(out));
    std::fputs(r.summary().c_str(), stdout);
    return check_gates(r, g);
}

struct PipelineArgs
{
    std::string config;
    std::string data;
    std::string save_data;
    std::string out = "out";
    Gates gates;
};

int pipeline(Context const& ctx, PipelineArgs const& a)
{
    auto const cfg = ExperimentConfig::from_json(load_json(ctx.path(a.config)));
    PipelineReport report;
    if (!a.data.empty())
    {
        auto const data = read_dataset(ctx.path(a.data));
        report = run_pipeline_on(cfg, cfg.model, &data);
    }
    else if (cfg.exact_moments)
    {
        report = run_pipeline(cfg);
    }
    else
    {
        auto const data = synth_generate(cfg);
        if (!a.save_data.empty())
            write_dataset(ctx.path(a.save_data), data);
        report = run_pipeline_on(cfg, cfg.model, &data);
    }
    return finish_pipeline(ctx, a.out, report, a.gates);
}

struct SelftaughtArgs
{
    std::string config;
    std::string source;
    std::string target;
    std::string out = "out";
    bool fail_on_low_likelihood = false;
    Gates gates;
};

int selftaught(Context const& ctx, SelftaughtArgs const& a)
{
    auto const cfg = ExperimentConfig::from_json(load_json(ctx.path(a.config)));
    auto const source = a.source.empty() ? synth_unlabeled(cfg) : read_points(ctx.path(a.source));
    auto const target = a.target.empty() ? synth_generate(cfg) : read_dataset(ctx.path(a.target));
    auto const report = selftaught_pipeline(source, target, cfg);
    int code = finish_pipeline(ctx, a.out, report, a.gates);
    if (a.fail_on_low_likelihood && report.transfer && report.transfer->low_likelihood)
        code = kGate;
    return code;
}

void add_decomp_options(CLI::App* cmd, DecompConfig& cfg)
{
    cmd->add_option("--k", cfg.k, "Number of components")->check(CLI::PositiveNumber);
    cmd->add_option("--inits", cfg.inits, "Random starts (0: max(50, 10k))");
    cmd->add_option("--iterations", cfg.iterations, "Power iterations per start");
    cmd->add_option("--nu", cfg.nu, "Clustering threshold");
    cmd->add_option("--tol", cfg.tol, "Convergence tolerance");
    cmd->add_option("--seed", cfg.seed, "Random seed");
    cmd->add_option("--workers", cfg.workers, "Worker threads (0: all cores)");
}

void add_gate_options(CLI::App* cmd, Gates& g)
{
    cmd->add_option("--max-recovery-error", g.max_recovery_error, "Fail with exit 4 above this error");
    cmd->add_flag("--require-stein", g.require_stein, "Fail with exit 4 unless the Stein check passes");
    cmd->add_flag("--require-signal", g.require_signal, "Fail with exit 4 when no signal is detected");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Higher-order score functions, Stein moments and tensor decomposition"};
    app.require_subcommand(1);
    Context ctx;
    app.add_option("--workdir", ctx.workdir, "Directory that relative paths refer to")->check(CLI::ExistingDirectory);

    ScoreEvalArgs se;
    auto* c_score = app.add_subcommand("score-eval", "Evaluate S_m at points from a CSV file");
    c_score->add_option("--model", se.model, "Model JSON")->required();
    c_score->add_option("--points", se.points, "CSV with columns x1..xd")->required();
    c_score->add_option("--order", se.order, "Score order (1-4)")->check(CLI::Range(1, 4));
    c_score->add_option("--method", se.method, "recursion or explicit")
        ->check(CLI::IsMember({"recursion", "explicit"}));
    c_score->add_option("--out", se.out, "Output JSON");

    MomentArgs mo;
    auto* c_moment = app.add_subcommand("moment", "Cross-moment of labels and scores");
    c_moment->add_option("--model", mo.model, "Model JSON")->required();
    c_moment->add_option("--data", mo.data, "CSV with columns x1..xd,y1..yp")->required();
    c_moment->add_option("--order", mo.order, "Score order (1-4)")->check(CLI::Range(1, 4));
    c_moment->add_option("--workers", mo.workers, "Worker threads (0: all cores)");
    c_moment->add_option("--out", mo.out, "Output tensor file");
    c_moment->add_option("--se-out", mo.se_out, "Optional standard-error tensor file");

    SteinArgs st;
    auto* c_stein = app.add_subcommand("stein-check", "Monte Carlo check of E[G S_m] = E[grad^m G]");
    c_stein->add_option("--model", st.model, "Model JSON")->required();
    c_stein->add_option("--g", st.g, "Polynomial label function JSON")->required();
    c_stein->add_option("--order", st.order, "Score order (1-4)")->check(CLI::Range(1, 4));
    c_stein->add_option("--samples", st.samples, "Monte Carlo sample count");
    c_stein->add_option("--seed", st.seed, "Random seed");
    c_stein->add_option("--workers", st.workers, "Worker threads (0: all cores)");
    c_stein->add_option("--se-gate", st.se_gate, "Allowed gap in standard errors");
    c_stein->add_option("--out", st.out, "Output JSON");

    DecomposeArgs de;
    auto* c_dec = app.add_subcommand("decompose", "Tensor power-method decomposition of a tensor file");
    c_dec->add_option("--tensor", de.tensor, "Symmetric tensor file")->required();
    c_dec->add_option("--whiten-with", de.m2, "Second-moment matrix file for whitening");
    c_dec->add_option("--init", de.init, "random or svd")->check(CLI::IsMember({"random", "svd"}));
    c_dec->add_option("--out", de.out, "Output JSON");
    add_decomp_options(c_dec, de.cfg);

    PipelineArgs pi;
    auto* c_pipe = app.add_subcommand("pipeline", "End-to-end run from an experiment config");
    c_pipe->add_option("--config", pi.config, "Experiment config JSON")->required();
    c_pipe->add_option("--data", pi.data, "Use this labeled CSV instead of synthetic data");
    c_pipe->add_option("--save-data", pi.save_data, "Write the synthetic dataset to this CSV");
    c_pipe->add_option("--out", pi.out, "Output directory");
    add_gate_options(c_pipe, pi.gates);

    SelftaughtArgs sf;
    auto* c_self = app.add_subcommand("selftaught", "Refit mixing weights on target inputs, then run the pipeline");
    c_self->add_option("--config", sf.config, "Experiment config JSON with a GMM model")->required();
    c_self->add_option("--source", sf.source, "Unlabeled source CSV (synthetic when absent)");
    c_self->add_option("--target", sf.target, "Labeled target CSV (synthetic when absent)");
    c_self->add_option("--out", sf.out, "Output directory");
    c_self->add_flag("--fail-on-low-likelihood", sf.fail_on_low_likelihood, "Exit 4 when the target fit is poor");
    add_gate_options(c_self, sf.gates);

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::CallForHelp const& e)
    {
        return app.exit(e);
    }
    catch (CLI::ParseError const& e)
    {
        app.exit(e);
        return kValidation;
    }

    try
    {
        if (c_score->parsed())
            return score_eval(ctx, se);
        if (c_moment->parsed())
            return moment(ctx, mo);
        if (c_stein->parsed())
            return stein_check(ctx, st);
        if (c_dec->parsed())
            return decompose_cmd(ctx, de);
        if (c_pipe->parsed())
            return pipeline(ctx, pi);
        if (c_self->parsed())
            return selftaught(ctx, sf);
    }
    catch (StageError const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        auto const& out = c_self->parsed() ? sf.out : pi.out;
        try
        {
            write_pipeline_outputs(e.partial(), ctx.path(out));
        }
        catch (std::exception const& w)
        {
            std::cerr << "could not write partial outputs: " << w.what() << "\n";
        }
        return e.numeric() ? kNumeric : kValidation;
    }
    catch (ValidationError const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    }
    catch (NumericError const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kUnexpected;
    }
    return kOk;
}
