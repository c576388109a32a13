// Command-line frontend. Every module is reachable through a subcommand;
// experiment subcommands share the flat key = value config surface, with
// flags overriding the file and the file overriding environment defaults
// (STRETCHPERC_SEED, STRETCHPERC_THREADS fill in when neither is given).
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "stretchperc/crossings.hpp"
#include "stretchperc/duality.hpp"
#include "stretchperc/experiments.hpp"
#include "stretchperc/io.hpp"
#include "stretchperc/renewal.hpp"

using namespace stretchperc;
using nlohmann::json;

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Precedence: flag > environment variable > config file > built-in default.
KvBlock merged_config(const std::string& config_path,
                      const std::map<std::string, std::string>& flag_overrides) {
    KvBlock kv;
    if (!config_path.empty()) kv = KvBlock::parse(read_text_file(config_path));
    if (!flag_overrides.count("seed"))
        if (const char* e = std::getenv("STRETCHPERC_SEED")) kv.set("seed", trim(e));
    if (!flag_overrides.count("threads"))
        if (const char* e = std::getenv("STRETCHPERC_THREADS")) kv.set("threads", trim(e));
    for (const auto& [key, value] : flag_overrides) kv.set(key, value);
    return kv;
}

uint64_t seed_from(const std::string& flag_value, bool flag_given) {
    if (flag_given) return uint64_t(parse_int_strict(flag_value));
    if (const char* e = std::getenv("STRETCHPERC_SEED")) return uint64_t(parse_int_strict(trim(e)));
    return 0;
}

std::vector<int64_t> int_list(const std::string& s) {
    std::vector<int64_t> out;
    for (const auto& tok : split(s, ','))
        if (!trim(tok).empty()) out.push_back(parse_int_strict(trim(tok)));
    return out;
}

struct ScaleFlags {
    int64_t L0 = 300;
    int kmax = 2;
    double epsilon = 1.0, alpha = 0.5, gamma = 1.2, mu = 0.5, beta = 0.9;
    std::string height = "desk";
    int64_t desk_h = 4;
    std::string ratios;  // explicit ladder overrides the floor-power rule

    void attach(CLI::App* cmd) {
        cmd->add_option("--L0", L0, "base scale");
        cmd->add_option("--kmax", kmax, "deepest scale index");
        cmd->add_option("--epsilon", epsilon, "decoupling exponent");
        cmd->add_option("--alpha", alpha, "bad-block probability exponent");
        cmd->add_option("--gamma", gamma, "scale growth exponent, L_{k+1} ~ L_k^gamma");
        cmd->add_option("--mu", mu, "height growth exponent");
        cmd->add_option("--beta", beta, "crossing-scale exponent");
        cmd->add_option("--height", height, "height schedule: desk or exact_log")
            ->check(CLI::IsMember({"desk", "exact_log"}));
        cmd->add_option("--desk-h", desk_h, "desk schedule multiplier, H_k = h*L_k");
        cmd->add_option("--ratios", ratios, "comma list of explicit block ratios (>= 2 each)");
    }
    ScaleSystem build() const {
        ScaleParams params = params_relaxed(epsilon, alpha, gamma, mu, beta);
        HeightMode mode = height == "desk" ? HeightMode::desk : HeightMode::exact_log;
        if (!ratios.empty())
            return scales_from_explicit(params, L0, int_list(ratios), mode, desk_h);
        return build_scales(params, L0, kmax, mode, desk_h);
    }
};

void add_kv_flag(CLI::App* cmd, std::map<std::string, std::string>& overrides,
                 const std::string& flag, const std::string& key, const std::string& desc) {
    cmd->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, desc);
}

// Experiment subcommands funnel through run(): results land in the JSONL
// record (and cfg.out when set); the summary below prints one line per task.
// Assertion-grade failures in the results turn into exit code 1.
int run_experiments(const std::string& config_path,
                    const std::map<std::string, std::string>& overrides,
                    const std::string& forced_task, bool dump_config) {
    KvBlock kv = merged_config(config_path, overrides);
    if (!forced_task.empty()) kv.set("tasks", forced_task);
    if (dump_config) {
        std::cout << kv.emit();
        return 0;
    }
    ExperimentConfig cfg = parse_config(kv.emit());
    RunRecord rec = run(cfg);
    int code = 0;
    for (size_t i = 1; i < rec.lines.size(); ++i) {
        json line = json::parse(rec.lines[i]);
        std::string task = line["task"].get<std::string>();
        json r = line["result"];
        if (task == "sweep") {
            std::cout << "sweep: pc_hat=" << fmt_double(r["pc_hat"].get<double>()) << " ci=["
                      << fmt_double(r["pc_lo"].get<double>()) << ","
                      << fmt_double(r["pc_hi"].get<double>())
                      << "] bracketed=" << (r["pc_bracketed"].get<bool>() ? 1 : 0)
                      << " points=" << r["curve"].size() << "\n";
        } else if (task == "heavytail") {
            bool ok = r["bounds_pass"].get<bool>() && r["monotone"].get<bool>();
            std::cout << "heavytail: rows=" << r["rows"].size()
                      << " bounds_pass=" << (r["bounds_pass"].get<bool>() ? 1 : 0)
                      << " monotone=" << (r["monotone"].get<bool>() ? 1 : 0) << "\n";
            if (!ok) code = 1;
        } else if (task == "certificate") {
            int64_t violations = r["violations"].get<int64_t>();
            std::cout << "certificate: n=" << r["n"].get<int64_t>() << " cert_hat="
                      << fmt_double(r["cert_hat"].get<double>())
                      << " bound=" << fmt_double(r["bound"].get<double>())
                      << " violations=" << violations
                      << " fkg_consistent=" << (r["fkg_consistent"].get<bool>() ? 1 : 0) << "\n";
            if (violations > 0 || !r["fkg_consistent"].get<bool>()) code = 1;
        } else if (task == "audit") {
            std::cout << "audit: p0_bound_pass=" << (r["p0_bound_pass"].get<bool>() ? 1 : 0)
                      << " all_pass=" << (r["all_pass"].get<bool>() ? 1 : 0) << "\n";
            if (!r["all_pass"].get<bool>()) code = 1;
        }
    }
    std::cout << "record: hash=" << json::parse(rec.lines[0])["hash"].get<std::string>()
              << " lines=" << rec.lines.size() << " reused=" << rec.reused
              << (cfg.out.empty() ? "" : " out=" + cfg.out) << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "stretchperc: percolation on a randomly stretched lattice.\n"
        "Seed precedence: --seed flag, then STRETCHPERC_SEED, then 0.\n"
        "Worker count: --threads flag, then STRETCHPERC_THREADS, then 1."};
    app.require_subcommand(1, 1);
    int exit_code = 0;

    // renewal ------------------------------------------------------------
    auto* ren = app.add_subcommand("renewal", "renewal-process utilities");
    ren->require_subcommand(1, 1);
    auto* pmf = ren->add_subcommand("pmf", "stationary delay pmf rho_0..rho_kmax, one CSV line");
    static std::string pmf_spec = "geometric:0.5";
    static int64_t pmf_kmax = 10;
    pmf->add_option("--spec", pmf_spec, "gap law (geometric:q, det:v, zeta:s, pmf:...)");
    pmf->add_option("--kmax", pmf_kmax, "largest delay to print");
    pmf->callback([&] {
        auto rho = stationary_delay_pmf(InterarrivalSpec::parse_compact(pmf_spec), pmf_kmax);
        for (size_t k = 0; k < rho.size(); ++k)
            std::cout << (k ? "," : "") << fmt_double(rho[k]);
        std::cout << "\n";
    });
    auto* smp = ren->add_subcommand("sample", "sample one trajectory; prints its arrivals");
    static std::string smp_spec = "geometric:0.5", smp_delay = "stationary", smp_seed;
    static int64_t smp_horizon = 50;
    smp->add_option("--spec", smp_spec, "gap law");
    smp->add_option("--delay", smp_delay, "delay law (dirac:v, stationary)");
    smp->add_option("--horizon", smp_horizon, "trajectory horizon");
    auto* smp_seed_opt = smp->add_option("--seed", smp_seed, "master seed");
    smp->callback([&] {
        RngStream rng(seed_from(smp_seed, smp_seed_opt->count() > 0), 1);
        RenewalTrajectory tr = sample_renewal(InterarrivalSpec::parse_compact(smp_spec),
                                              DelaySpec::parse_compact(smp_delay), smp_horizon,
                                              rng);
        for (size_t i = 0; i < tr.arrivals.size(); ++i)
            std::cout << (i ? "," : "") << tr.arrivals[i];
        std::cout << "\n";
    });

    // scales ---------------------------------------------------------------
    auto* sc = app.add_subcommand("scales", "print the scale ladder as CSV");
    static ScaleFlags sc_flags;
    sc_flags.attach(sc);
    sc->callback([&] {
        ScaleSystem sys = sc_flags.build();
        bool desk = sys.height_mode == HeightMode::desk;
        std::cout << "k,L,ratio," << (desk ? "H" : "log10_H") << "\n";
        for (int k = 0; k <= sys.kmax(); ++k) {
            std::cout << k << "," << sys.L[size_t(k)] << "," << sys.ratio[size_t(k)] << ",";
            if (desk)
                std::cout << sys.H[size_t(k)] << "\n";
            else
                std::cout << fmt_double(sys.log10_H(k)) << "\n";
        }
    });

    // label ------------------------------------------------------------
    auto* lab = app.add_subcommand("label", "realize an environment and print block labels");
    static ScaleFlags lab_flags;
    lab_flags.attach(lab);
    static std::string lab_spec = "geometric:0.5", lab_delay = "stationary", lab_seed;
    static double lab_horizon = -1;
    lab->add_option("--spec", lab_spec, "gap law");
    lab->add_option("--delay", lab_delay, "delay law");
    lab->add_option("--horizon", lab_horizon, "labeling horizon (default 4*L_kmax)");
    auto* lab_seed_opt = lab->add_option("--seed", lab_seed, "master seed");
    lab->callback([&] {
        ScaleSystem sys = lab_flags.build();
        double horizon = lab_horizon > 0 ? lab_horizon : 4.0 * double(sys.L_int(sys.kmax()));
        RngStream rng(seed_from(lab_seed, lab_seed_opt->count() > 0), 2);
        EnvironmentWindow env = realize_to_horizon(InterarrivalSpec::parse_compact(lab_spec),
                                                   DelaySpec::parse_compact(lab_delay), horizon,
                                                   rng);
        BlockLabelGrid grid = label_blocks(env, sys, sys.kmax(), horizon);
        std::cout << grid.rle_dump();
    });

    // pk ---------------------------------------------------------------
    auto* pk = app.add_subcommand("pk", "estimate the bad-block probability at one scale");
    static ScaleFlags pk_flags;
    pk_flags.attach(pk);
    static std::string pk_spec = "geometric:0.5", pk_seed;
    static int pk_k = 0;
    static int64_t pk_samples = 10000;
    pk->add_option("--spec", pk_spec, "gap law");
    pk->add_option("--k", pk_k, "scale index");
    pk->add_option("--samples", pk_samples, "environments to draw");
    auto* pk_seed_opt = pk->add_option("--seed", pk_seed, "master seed");
    pk->callback([&] {
        ScaleSystem sys = pk_flags.build();
        RngStream rng(seed_from(pk_seed, pk_seed_opt->count() > 0), 3);
        PkEstimate est = estimate_pk(InterarrivalSpec::parse_compact(pk_spec), sys, pk_k,
                                     pk_samples, rng);
        std::cout << "k=" << est.k << " n=" << est.n_samples << " bad=" << est.n_bad
                  << " p_hat=" << fmt_double(est.p_hat) << " ci=[" << fmt_double(est.ci_lo) << ","
                  << fmt_double(est.ci_hi) << "] log10_bound=" << fmt_double(est.log10_bound)
                  << " bound_pass=" << (est.bound_pass ? 1 : 0)
                  << " indistinguishable=" << (est.indistinguishable ? 1 : 0) << "\n";
    });

    // crossing ------------------------------------------------------------
    auto* cr = app.add_subcommand("crossing", "estimate one crossing probability");
    static std::string cr_spec = "det:1", cr_delay = "dirac:0", cr_rect = "0,1,0,1";
    static std::string cr_form = "inhomogeneous", cr_dir = "h", cr_seed;
    static double cr_p = 0.5;
    static int64_t cr_samples = 10000;
    static bool cr_exact = false;
    cr->add_option("--spec", cr_spec, "gap law");
    cr->add_option("--delay", cr_delay, "delay law");
    cr->add_option("--p", cr_p, "edge parameter")->check(CLI::Range(0.0, 1.0));
    cr->add_option("--rect", cr_rect, "a,b,c,d for R([a,b) x [c,d))");
    cr->add_option("--formulation", cr_form, "stretched_lengths | inhomogeneous | dilute");
    cr->add_option("--direction", cr_dir, "h or v")->check(CLI::IsMember({"h", "v"}));
    cr->add_option("--samples", cr_samples, "Monte Carlo sample count");
    cr->add_flag("--exact", cr_exact, "also enumerate exactly (<= 24 edges)");
    auto* cr_seed_opt = cr->add_option("--seed", cr_seed, "master seed");
    cr->callback([&] {
        auto nums = int_list(cr_rect);
        if (nums.size() != 4) throw SpecError("--rect needs four integers a,b,c,d");
        Rectangle r(nums[0], nums[1], nums[2], nums[3]);
        InterarrivalSpec spec = InterarrivalSpec::parse_compact(cr_spec);
        DelaySpec delay = DelaySpec::parse_compact(cr_delay);
        Formulation f = parse_formulation(cr_form);
        RngStream rng(seed_from(cr_seed, cr_seed_opt->count() > 0), 4);
        RngStream env_rng = rng.child(0);
        EnvironmentWindow env =
            f == Formulation::dilute
                ? realize_to_horizon(spec, delay, double(r.b), env_rng)
                : realize_environment(spec, delay, r.b + 1, env_rng);
        int64_t hits = 0;
        for (int64_t s = 0; s < cr_samples; ++s) {
            RngStream srng = rng.child(uint64_t(s) + 1);
            hits += streamed_crossing_sample(env, cr_p, r, f, cr_dir[0], srng) ? 1 : 0;
        }
        auto ci = wilson_ci(uint64_t(hits), uint64_t(cr_samples), 3.0);
        std::cout << "event=C" << cr_dir << " rect=[" << r.a << "," << r.b << ")x[" << r.c << ","
                  << r.d << ") estimate=" << fmt_double(double(hits) / double(cr_samples))
                  << " ci=[" << fmt_double(ci.lo) << "," << fmt_double(ci.hi)
                  << "] n=" << cr_samples;
        if (cr_exact) std::cout << " exact=" << fmt_double(exact_crossing_prob(env, cr_p, r, f,
                                                                               cr_dir[0]));
        std::cout << "\n";
    });

    // qk ---------------------------------------------------------------
    auto* qk = app.add_subcommand("qk", "estimate block-event failure rates at one scale");
    static ScaleFlags qk_flags;
    qk_flags.attach(qk);
    static std::string qk_spec = "geometric:0.5", qk_seed;
    static double qk_p = 0.9;
    static int qk_k = 0;
    static int64_t qk_envs = 3, qk_cfgs = 1000;
    qk->add_option("--spec", qk_spec, "gap law");
    qk->add_option("--p", qk_p, "edge parameter")->check(CLI::Range(0.0, 1.0));
    qk->add_option("--k", qk_k, "scale index");
    qk->add_option("--envs", qk_envs, "good environments to keep");
    qk->add_option("--cfgs", qk_cfgs, "configurations per environment");
    auto* qk_seed_opt = qk->add_option("--seed", qk_seed, "master seed");
    qk->callback([&] {
        ScaleSystem sys = qk_flags.build();
        RngStream rng(seed_from(qk_seed, qk_seed_opt->count() > 0), 5);
        QkEstimate est = estimate_qk(InterarrivalSpec::parse_compact(qk_spec), sys, qk_p, qk_k,
                                     qk_envs, qk_cfgs, rng);
        std::cout << "k=" << est.k << " p=" << fmt_double(est.p) << " envs=" << est.n_envs
                  << " cfgs=" << est.n_configs << " qk_hat=" << fmt_double(est.qk_hat)
                  << " worst_c=" << fmt_double(est.worst_c_fail)
                  << " worst_d=" << fmt_double(est.worst_d_fail)
                  << " rejections=" << est.rejections << "\n";
    });

    // dual ------------------------------------------------------------
    auto* du = app.add_subcommand("dual",
                                  "contract an environment, sample the window, dump its dual");
    static std::string du_spec = "geometric:0.5", du_seed, du_out;
    static double du_p = 0.6;
    static int64_t du_w = 8, du_h = 8;
    du->add_option("--spec", du_spec, "gap law");
    du->add_option("--p", du_p, "edge parameter")->check(CLI::Range(0.0, 1.0));
    du->add_option("--width", du_w, "contracted window width")->check(CLI::PositiveNumber);
    du->add_option("--height", du_h, "contracted window height")->check(CLI::PositiveNumber);
    du->add_option("--out", du_out, "dump path (default stdout)");
    auto* du_seed_opt = du->add_option("--seed", du_seed, "master seed");
    du->callback([&] {
        InterarrivalSpec spec = InterarrivalSpec::parse_compact(du_spec);
        double kappa = choose_kappa(spec);
        RngStream rng(seed_from(du_seed, du_seed_opt->count() > 0), 6);
        ContractionResult ctr;
        int64_t n_gaps = std::max<int64_t>(64, 8 * du_w);
        bool covered = false;
        for (int attempt = 0; attempt < 16 && !covered; ++attempt, n_gaps *= 2) {
            RngStream er = rng.child(uint64_t(100 + attempt));
            EnvironmentWindow env = realize_environment(spec, DelaySpec::dirac(0), n_gaps, er);
            ctr = contract(env, kappa);
            covered = !ctr.empty() && int64_t(ctr.zeta.size()) >= du_w - 1;
        }
        if (!covered)
            throw SpecError("could not realize enough gaps >= kappa for the requested width");
        RngStream wrng = rng.child(1);
        PercWindow w = sample_contracted(ctr, du_p, Rectangle(0, du_w, 0, du_h), wrng);
        RngStream drng = rng.child(2);
        DualWindow dw = dualize(w, ctr, drng);
        if (du_out.empty()) {
            dump_dual(dw, std::cout);
        } else {
            std::ofstream out(du_out);
            if (!out) throw SpecError("cannot open output path: " + du_out);
            dump_dual(dw, out);
            std::cout << "dual: kappa=" << fmt_double(dw.kappa)
                      << " p_dual=" << fmt_double(dw.p_dual) << " W=" << dw.W << " H=" << dw.H
                      << " out=" << du_out << "\n";
        }
    });

    // experiment family ------------------------------------------------
    static std::string ex_config;
    static std::map<std::string, std::string> ex_overrides;
    static bool ex_dump = false;
    auto attach_experiment_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", ex_config, "flat key = value config file");
        cmd->add_flag("--dump-config", ex_dump, "print the merged config and exit");
        add_kv_flag(cmd, ex_overrides, "--spec", "spec", "gap law");
        add_kv_flag(cmd, ex_overrides, "--formulation", "formulation", "model formulation");
        add_kv_flag(cmd, ex_overrides, "--p-grid", "p_grid", "comma list of parameters");
        add_kv_flag(cmd, ex_overrides, "--box", "box", "sweep window side");
        add_kv_flag(cmd, ex_overrides, "--replicas", "replicas", "replicas per grid point");
        add_kv_flag(cmd, ex_overrides, "--seed", "seed", "master seed");
        add_kv_flag(cmd, ex_overrides, "--threads", "threads", "worker count");
        add_kv_flag(cmd, ex_overrides, "--out", "out", "JSONL record path");
        add_kv_flag(cmd, ex_overrides, "--ht-eta", "ht_eta", "heavy-tail moment order");
        add_kv_flag(cmd, ex_overrides, "--ht-p", "ht_p", "heavy-tail edge parameter");
        add_kv_flag(cmd, ex_overrides, "--ht-ik", "ht_ik", "requested huge-gap indices");
        add_kv_flag(cmd, ex_overrides, "--ht-samples", "ht_samples", "crossing samples per row");
        add_kv_flag(cmd, ex_overrides, "--ht-horizon", "ht_horizon", "environment horizon");
        add_kv_flag(cmd, ex_overrides, "--ht-decay-n", "ht_decay_n", "decay radii");
        add_kv_flag(cmd, ex_overrides, "--ht-decay-samples", "ht_decay_samples",
                    "decay replicas");
        add_kv_flag(cmd, ex_overrides, "--ht-budget", "ht_budget", "cell budget per row");
        add_kv_flag(cmd, ex_overrides, "--epsilon", "epsilon", "decoupling exponent");
        add_kv_flag(cmd, ex_overrides, "--alpha", "alpha", "bad-block exponent");
        add_kv_flag(cmd, ex_overrides, "--gamma", "gamma", "scale growth exponent");
        add_kv_flag(cmd, ex_overrides, "--mu", "mu", "height growth exponent");
        add_kv_flag(cmd, ex_overrides, "--beta", "beta", "crossing-scale exponent");
        add_kv_flag(cmd, ex_overrides, "--L0", "L0", "base scale");
        add_kv_flag(cmd, ex_overrides, "--desk-h", "desk_h", "desk height multiplier");
        add_kv_flag(cmd, ex_overrides, "--waive-validation", "waive_validation",
                    "1 skips parameter admissibility (recorded in the config hash)");
        add_kv_flag(cmd, ex_overrides, "--c1-upper", "c1_upper", "assumed decoupling constant");
        add_kv_flag(cmd, ex_overrides, "--cert-p", "cert_p", "certificate edge parameter");
        add_kv_flag(cmd, ex_overrides, "--cert-ratios", "cert_ratios", "explicit ladder ratios");
        add_kv_flag(cmd, ex_overrides, "--cert-k0", "cert_k0", "first certified scale");
        add_kv_flag(cmd, ex_overrides, "--cert-K", "cert_K", "last certified scale");
        add_kv_flag(cmd, ex_overrides, "--cert-envs", "cert_envs", "environments for q_k");
        add_kv_flag(cmd, ex_overrides, "--cert-cfgs", "cert_cfgs", "configs per environment");
        add_kv_flag(cmd, ex_overrides, "--cert-trials", "cert_trials", "certificate trials");
        add_kv_flag(cmd, ex_overrides, "--audit-kmax", "audit_kmax", "deepest audited scale");
        add_kv_flag(cmd, ex_overrides, "--audit-samples", "audit_samples", "audit sample count");
        add_kv_flag(cmd, ex_overrides, "--tasks", "tasks", "comma list of tasks (run only)");
    };
    auto* sweep_cmd = app.add_subcommand("sweep", "crossing-probability sweep over a p grid");
    attach_experiment_flags(sweep_cmd);
    sweep_cmd->callback(
        [&] { exit_code = run_experiments(ex_config, ex_overrides, "sweep", ex_dump); });
    auto* ht_cmd = app.add_subcommand("heavytail", "heavy-tail non-percolation demonstration");
    attach_experiment_flags(ht_cmd);
    ht_cmd->callback(
        [&] { exit_code = run_experiments(ex_config, ex_overrides, "heavytail", ex_dump); });
    auto* cert_cmd = app.add_subcommand("certificate", "ladder-certificate experiment");
    attach_experiment_flags(cert_cmd);
    cert_cmd->callback(
        [&] { exit_code = run_experiments(ex_config, ex_overrides, "certificate", ex_dump); });
    auto* run_cmd = app.add_subcommand("run", "execute the config's task list");
    attach_experiment_flags(run_cmd);
    run_cmd->callback(
        [&] { exit_code = run_experiments(ex_config, ex_overrides, "", ex_dump); });

    if (argc <= 1) {
        std::cout << app.help();
        return 2;
    }
    // contextual help: "<subcommand> --help" documents that subcommand's flags
    bool want_help = false;
    for (int i = 2; i < argc; ++i)
        if (std::string(argv[i]) == "--help" || std::string(argv[i]) == "-h") want_help = true;
    if (want_help) {
        try {
            CLI::App* sub = app.get_subcommand(std::string(argv[1]));
            if (argc >= 3) {
                try {
                    sub = sub->get_subcommand(std::string(argv[2]));
                } catch (const CLI::OptionNotFound&) {
                }
            }
            std::cout << sub->help();
            return 0;
        } catch (const CLI::OptionNotFound&) {
            // not a subcommand; the normal parse below reports the usage error
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
