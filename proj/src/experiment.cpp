#include "bulkdiff/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bulkdiff/dynamics.hpp"
#include "bulkdiff/greenkubo.hpp"
#include "bulkdiff/pde.hpp"
#include "bulkdiff/version.hpp"
#include "json.hpp"

namespace bulkdiff {

using nlohmann::json;

CoefficientModel ExperimentConfig::model() const {
    return CoefficientModel(model_kind_from_string(model_kind), model_lambda,
                            model_threshold, model_smoothing);
}

Vec ExperimentConfig::direction_vec() const {
    if (direction.empty()) return dimension == 1 ? vec1(1.0) : vec2(1.0, 0.0);
    Vec p;
    for (int k = 0; k < dimension && k < static_cast<int>(direction.size()); ++k)
        p[k] = direction[static_cast<std::size_t>(k)];
    return p;
}

CellProblemSpec ExperimentConfig::cell_spec(int m) const {
    CellProblemSpec s;
    s.cell = Domain::cube(dimension, m);
    s.rho = rho;
    s.model = model();
    s.direction = direction_vec();
    s.basis = basis;
    s.samples = samples;
    s.eval_samples = eval_samples;
    s.seed = seed;
    s.workers = workers;
    return s;
}

namespace {

template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig c;
    if (j.contains("model")) {
        const json& m = j.at("model");
        read_if(m, "kind", c.model_kind);
        read_if(m, "lambda", c.model_lambda);
        read_if(m, "threshold", c.model_threshold);
        read_if(m, "smoothing", c.model_smoothing);
    }
    read_if(j, "dimension", c.dimension);
    read_if(j, "rho", c.rho);
    read_if(j, "direction", c.direction);
    read_if(j, "m_list", c.m_list);
    if (j.contains("basis")) {
        const json& b = j.at("basis");
        read_if(b, "spacing", c.basis.spacing);
        read_if(b, "radii", c.basis.radii);
        read_if(b, "thresholds", c.basis.thresholds);
        read_if(b, "interactions", c.basis.interactions);
    }
    read_if(j, "samples", c.samples);
    read_if(j, "eval_samples", c.eval_samples);
    read_if(j, "palm_samples", c.palm_samples);
    read_if(j, "seed", c.seed);
    read_if(j, "lambda_grid", c.lambda_grid);
    if (j.contains("two_point")) {
        const json& t = j.at("two_point");
        read_if(t, "torus_side", c.two_point.torus_side);
        read_if(t, "dt", c.two_point.dt);
        read_if(t, "replicas", c.two_point.replicas);
        read_if(t, "grid_intervals", c.two_point.grid_intervals);
        if (t.contains("pairs")) {
            c.two_point.pairs.clear();
            for (const auto& p : t.at("pairs"))
                c.two_point.pairs.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        if (t.contains("f")) {
            read_if(t.at("f"), "center", c.two_point.f_center);
            read_if(t.at("f"), "sigma", c.two_point.f_sigma);
        }
        if (t.contains("g")) {
            read_if(t.at("g"), "center", c.two_point.g_center);
            read_if(t.at("g"), "sigma", c.two_point.g_sigma);
        }
    }
    if (j.contains("alpha_override") && !j.at("alpha_override").is_null())
        c.alpha_override = j.at("alpha_override").get<double>();
    if (j.contains("abar_reference") && !j.at("abar_reference").is_null())
        c.abar_reference = j.at("abar_reference").get<double>();
    read_if(j, "output_dir", c.output_dir);
    read_if(j, "workers", c.workers);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["model"] = {{"kind", model_kind},
                  {"lambda", model_lambda},
                  {"threshold", model_threshold},
                  {"smoothing", model_smoothing}};
    j["dimension"] = dimension;
    j["rho"] = rho;
    if (!direction.empty()) j["direction"] = direction;
    j["m_list"] = m_list;
    j["basis"] = {{"spacing", basis.spacing},
                  {"radii", basis.radii},
                  {"thresholds", basis.thresholds},
                  {"interactions", basis.interactions}};
    j["samples"] = samples;
    j["eval_samples"] = eval_samples;
    j["palm_samples"] = palm_samples;
    j["seed"] = seed;
    j["lambda_grid"] = lambda_grid;
    json tp;
    tp["torus_side"] = two_point.torus_side;
    tp["dt"] = two_point.dt;
    tp["replicas"] = two_point.replicas;
    tp["grid_intervals"] = two_point.grid_intervals;
    json pairs = json::array();
    for (const auto& p : two_point.pairs) pairs.push_back({p[0], p[1]});
    tp["pairs"] = pairs;
    tp["f"] = {{"center", two_point.f_center}, {"sigma", two_point.f_sigma}};
    tp["g"] = {{"center", two_point.g_center}, {"sigma", two_point.g_sigma}};
    j["two_point"] = tp;
    j["alpha_override"] = alpha_override ? json(*alpha_override) : json(nullptr);
    j["abar_reference"] = abar_reference ? json(*abar_reference) : json(nullptr);
    j["output_dir"] = output_dir;
    j["workers"] = workers;
    return j.dump(2);
}

std::uint64_t ExperimentConfig::config_hash() const {
    // FNV-1a over the canonical dump
    const std::string text = to_json_text();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

void ExperimentConfig::validate() const {
    if (dimension != 1 && dimension != 2)
        throw std::invalid_argument("config: dimension must be 1 or 2");
    if (!(rho > 0.0)) throw std::invalid_argument("config: rho must be positive");
    if (model_lambda < 1.0)
        throw std::invalid_argument("config: ellipticity ceiling must be >= 1");
    model(); // validates the remaining model parameters
    if (m_list.empty()) throw std::invalid_argument("config: m_list is empty");
    for (int m : m_list)
        if (m < 0 || m > 8) throw std::invalid_argument("config: m out of supported range");
    if (samples == 0) throw std::invalid_argument("config: samples must be >= 1");
    for (double l : lambda_grid)
        if (l < 0.0) throw std::invalid_argument("config: lambda grid entries must be >= 0");
    if (!(two_point.torus_side > 2.0))
        throw std::invalid_argument("config: torus side must exceed 2");
    if (!(two_point.dt > 0.0)) throw std::invalid_argument("config: dt must be positive");
    if (two_point.replicas == 0)
        throw std::invalid_argument("config: replicas must be >= 1");
    if (two_point.grid_intervals < 8)
        throw std::invalid_argument("config: grid too coarse");
    for (const auto& p : two_point.pairs)
        if (!(p[0] >= p[1] && p[1] >= 0.0))
            throw std::invalid_argument("config: time pairs need t >= s >= 0");
    if (alpha_override && !(*alpha_override > 0.0))
        throw std::invalid_argument("config: alpha override must be positive");
}

std::string resolve_output_dir(const std::string& configured) {
    namespace fs = std::filesystem;
    fs::path p(configured);
    if (p.is_relative()) {
        if (const char* root = std::getenv("BULKDIFF_OUTPUT_ROOT")) p = fs::path(root) / p;
    }
    return p.string();
}

namespace {

struct ManifestWriter {
    json tasks = json::array();
    std::vector<std::string> files;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void task(const std::string& name, std::uint64_t seed) {
        tasks.push_back({{"name", name}, {"seed", seed}});
    }

    std::string write(const std::string& dir, const std::string& command,
                      const ExperimentConfig& cfg) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json m;
        m["command"] = command;
        m["version"] = BULKDIFF_VERSION;
        char hash_hex[32];
        std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                      static_cast<unsigned long long>(cfg.config_hash()));
        m["config_hash"] = hash_hex;
        m["config"] = json::parse(cfg.to_json_text());
        m["tasks"] = tasks;
        m["wall_clock_seconds"] = secs;
        m["files"] = files;
        const std::string path = dir + "/" + command + "_manifest.json";
        std::ofstream os(path);
        os << m.dump(2) << "\n";
        return path;
    }
};

std::string ensure_outdir(const ExperimentConfig& cfg) {
    const std::string dir = resolve_output_dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void csv_header(std::ofstream& os, const ExperimentConfig& cfg, const char* command) {
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(cfg.config_hash()));
    os << "# bulkdiff " << command << " v" << BULKDIFF_VERSION << "\n";
    os << "# config_hash=" << hash_hex << " model=" << cfg.model().describe()
       << " rho=" << cfg.rho << " d=" << cfg.dimension << " seed=" << cfg.seed << "\n";
}

double alpha_for_reports(const ExperimentConfig& cfg,
                         const std::vector<AbarEstimate>& table, std::string& note) {
    if (cfg.alpha_override) {
        note = "alpha from user override";
        return *cfg.alpha_override;
    }
    if (table.size() >= 3) {
        const ExtrapolationResult ex = extrapolate_abar(table);
        if (ex.accepted && !std::isnan(ex.alpha_hat)) {
            note = "alpha fitted from the scale table";
            return ex.alpha_hat;
        }
    }
    note = "alpha defaulted to 1 (no usable fit; see extrapolation output)";
    return 1.0;
}

} // namespace

CommandResult cmd_abar(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string dir = ensure_outdir(cfg);
    ManifestWriter manifest;
    CommandResult out;

    std::vector<AbarEstimate> table;
    for (int m : cfg.m_list) {
        manifest.task("abar_m" + std::to_string(m), cfg.seed);
        table.push_back(assemble_abar(cfg.cell_spec(m)));
    }

    const std::string csv_path = dir + "/abar.csv";
    {
        std::ofstream os(csv_path);
        os.precision(12);
        csv_header(os, cfg, "abar");
        os << "m,i,j,abar,abar_se,abar_star,abar_star_se,j_gap,j_gap_se,j_quad,j_quad_se\n";
        for (const auto& e : table) {
            const int d = e.abar.matrix.d;
            for (int i = 0; i < d; ++i) {
                for (int k = 0; k < d; ++k) {
                    os << e.m << "," << i << "," << k << "," << e.abar.matrix(i, k) << ","
                       << e.abar.std_err(i, k) << "," << e.abar_star.matrix(i, k) << ","
                       << e.abar_star.std_err(i, k) << ",";
                    if (i == k) {
                        const DualityGap& g = e.gaps[static_cast<std::size_t>(i)];
                        os << g.j << "," << g.j_std_error << "," << g.j_quadratic << ","
                           << g.j_quadratic_se;
                    } else {
                        os << ",,,";
                    }
                    os << "\n";
                }
            }
        }
    }
    manifest.files.push_back(csv_path);
    out.files.push_back(csv_path);

    const std::string extra_path = dir + "/abar_extrapolation.json";
    {
        std::ofstream os(extra_path);
        if (table.size() >= 3) {
            os << extrapolate_abar(table).to_json() << "\n";
        } else {
            os << json({{"accepted", false},
                        {"note", "need at least three scales to extrapolate"}})
                      .dump(2)
               << "\n";
        }
    }
    manifest.files.push_back(extra_path);
    out.files.push_back(extra_path);

    const std::string solutions_path = dir + "/abar_scales.json";
    {
        json arr = json::array();
        for (const auto& e : table) arr.push_back(json::parse(e.to_json()));
        std::ofstream os(solutions_path);
        os << arr.dump(2) << "\n";
    }
    manifest.files.push_back(solutions_path);
    out.files.push_back(solutions_path);

    out.files.push_back(manifest.write(dir, "abar", cfg));
    out.summary = "scales=" + std::to_string(table.size());
    return out;
}

CommandResult cmd_two_point(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string dir = ensure_outdir(cfg);
    ManifestWriter manifest;
    CommandResult out;

    const int d = cfg.dimension;
    const Domain torus = Domain::torus(d, cfg.two_point.torus_side);
    const double fc = cfg.two_point.f_center, fs = cfg.two_point.f_sigma;
    const double gc = cfg.two_point.g_center, gs = cfg.two_point.g_sigma;
    auto bump = [&](double c0, double s0) {
        const Vec center = vec2(c0, c0);
        return GridFunction::sampled(torus, cfg.two_point.grid_intervals,
                                     [&, center, s0](const Vec& x) {
                                         const Vec u = torus.displacement(x, center);
                                         double q = 0.0;
                                         for (int k = 0; k < d; ++k) q += u[k] * u[k];
                                         return std::exp(-q / (2.0 * s0 * s0));
                                     });
    };
    const GridFunction f = bump(fc, fs);
    const GridFunction g = bump(gc, gs);

    const HeatKernel hk(SymMatrix::isotropic(d, cfg.abar_reference.value_or(1.0)), d);

    ChainParams params;
    params.dt = cfg.two_point.dt;
    params.torus = torus;
    params.model = cfg.model();
    params.rho = cfg.rho;

    const std::string csv_path = dir + "/two_point.csv";
    std::ofstream os(csv_path);
    os.precision(12);
    csv_header(os, cfg, "two-point");
    os << "# abar_reference=" << cfg.abar_reference.value_or(1.0) << "\n";
    os << "t,s,estimate,std_error,prediction,discrepancy\n";
    for (const auto& pair : cfg.two_point.pairs) {
        manifest.task("two_point_t" + std::to_string(pair[0]) + "_s" + std::to_string(pair[1]),
                      cfg.seed);
        const CorrelationEstimate est =
            two_point_estimate(f, g, pair[0], pair[1], params, cfg.two_point.replicas,
                               cfg.seed, hk, cfg.workers);
        os << est.t << "," << est.s << "," << est.estimate << "," << est.std_error << ","
           << est.prediction << "," << est.discrepancy << "\n";
    }
    os.close();
    manifest.files.push_back(csv_path);
    out.files.push_back(csv_path);

    // kernel prediction table per time gap
    const std::string pred_path = dir + "/two_point_predictions.csv";
    {
        std::ofstream po(pred_path);
        po.precision(12);
        csv_header(po, cfg, "two-point");
        po << "dt,value,quadrature_error\n";
        for (const auto& pair : cfg.two_point.pairs) {
            const TwoPointPrediction pred =
                two_point_prediction(f, g, pair[0] - pair[1], hk, cfg.rho);
            po << (pair[0] - pair[1]) << "," << pred.value << ","
               << pred.quadrature_error << "\n";
        }
    }
    manifest.files.push_back(pred_path);
    out.files.push_back(pred_path);
    out.files.push_back(manifest.write(dir, "two-point", cfg));
    out.summary = "pairs=" + std::to_string(cfg.two_point.pairs.size());
    return out;
}

CommandResult cmd_green_kubo(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string dir = ensure_outdir(cfg);
    ManifestWriter manifest;
    CommandResult out;

    // variational references per scale, and the rate for regime labels
    std::vector<AbarEstimate> table;
    std::vector<CellSolution> nu_refs;
    for (int m : cfg.m_list) {
        manifest.task("gk_reference_m" + std::to_string(m), cfg.seed);
        nu_refs.push_back(solve_nu(cfg.cell_spec(m)));
    }
    if (cfg.m_list.size() >= 3 && !cfg.alpha_override) {
        for (int m : cfg.m_list) table.push_back(assemble_abar(cfg.cell_spec(m)));
    }
    std::string alpha_note;
    const double alpha_used = alpha_for_reports(cfg, table, alpha_note);

    const std::string csv_path = dir + "/green_kubo.csv";
    std::ofstream os(csv_path);
    os.precision(12);
    csv_header(os, cfg, "green-kubo");
    os << "# alpha_used=" << alpha_used << " (" << alpha_note << ")\n";
    os << "m,lambda,bracket,bracket_se,regime\n";

    json reports = json::array();
    for (std::size_t mi = 0; mi < cfg.m_list.size(); ++mi) {
        const int m = cfg.m_list[mi];
        const CellProblemSpec spec = cfg.cell_spec(m);
        for (double lam : cfg.lambda_grid) {
            manifest.task("gk_m" + std::to_string(m) + "_lambda" + std::to_string(lam),
                          cfg.seed);
            const GKReport rep = gk_bracket(spec, lam, nu_refs[mi].value,
                                            nu_refs[mi].std_error, alpha_used,
                                            cfg.palm_samples);
            os << m << "," << lam << "," << rep.bracket << "," << rep.bracket_se << ","
               << rep.regime << "\n";
            reports.push_back(json::parse(rep.to_json()));
        }
    }
    os.close();
    manifest.files.push_back(csv_path);
    out.files.push_back(csv_path);

    const std::string reports_path = dir + "/green_kubo_reports.json";
    {
        std::ofstream ro(reports_path);
        ro << reports.dump(2) << "\n";
    }
    manifest.files.push_back(reports_path);
    out.files.push_back(reports_path);
    out.files.push_back(manifest.write(dir, "green-kubo", cfg));
    out.summary = "alpha_used=" + std::to_string(alpha_used);
    return out;
}

RunStatus run_command(const std::string& command, const std::string& config_path_or_json,
                      const std::string& output_dir_override, int workers_override,
                      std::optional<std::uint64_t> seed_override,
                      std::optional<double> alpha_override, std::ostream& log) {
    try {
        if (command == "selftest") {
            const SelftestReport rep = run_selftest(log);
            return rep.ok() ? RunStatus::Ok : RunStatus::CheckFailed;
        }

        ExperimentConfig cfg;
        const auto first = config_path_or_json.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && config_path_or_json[first] == '{')
            cfg = ExperimentConfig::from_json_text(config_path_or_json);
        else
            cfg = ExperimentConfig::from_file(config_path_or_json);
        if (!output_dir_override.empty()) cfg.output_dir = output_dir_override;
        if (workers_override > 0) cfg.workers = workers_override;
        if (seed_override) cfg.seed = *seed_override;
        if (alpha_override) cfg.alpha_override = *alpha_override;
        cfg.validate();

        CommandResult res;
        if (command == "abar")
            res = cmd_abar(cfg);
        else if (command == "two-point")
            res = cmd_two_point(cfg);
        else if (command == "green-kubo")
            res = cmd_green_kubo(cfg);
        else {
            log << "unknown command: " << command << "\n";
            return RunStatus::ValidationError;
        }
        for (const auto& f : res.files) log << "wrote " << f << "\n";
        if (!res.summary.empty()) log << command << ": " << res.summary << "\n";
        return RunStatus::Ok;
    } catch (const nlohmann::json::exception& e) {
        log << "config error: " << e.what() << "\n";
        return RunStatus::ValidationError;
    } catch (const std::invalid_argument& e) {
        log << "validation error: " << e.what() << "\n";
        return RunStatus::ValidationError;
    } catch (const std::exception& e) {
        log << "numerical failure: " << e.what() << "\n";
        return RunStatus::NumericError;
    }
}

} // namespace bulkdiff
