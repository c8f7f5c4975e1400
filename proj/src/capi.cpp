#include "bulkdiff/bulkdiff.h"

#include <cmath>
#include <cstring>
#include <sstream>
#include <string>

#include "bulkdiff/cell.hpp"
#include "bulkdiff/experiment.hpp"
#include "bulkdiff/pde.hpp"
#include "bulkdiff/version.hpp"
#include "json.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <class Fn>
bd_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const nlohmann::json::exception& e) {
        set_error(e.what());
        return BD_ERR_INVALID;
    } catch (const std::invalid_argument& e) {
        set_error(e.what());
        return BD_ERR_INVALID;
    } catch (const std::exception& e) {
        set_error(e.what());
        return BD_ERR_NUMERIC;
    } catch (...) {
        set_error("unknown failure");
        return BD_ERR_UNKNOWN;
    }
}

bulkdiff::Domain make_domain(int d, int torus, double side) {
    return torus ? bulkdiff::Domain::torus(d, side) : bulkdiff::Domain::box(d, side);
}

bulkdiff::Configuration make_config(int d, int torus, double side, const double* pts,
                                    size_t npts) {
    bulkdiff::Configuration mu(make_domain(d, torus, side));
    for (size_t i = 0; i < npts; ++i) {
        bulkdiff::Vec p;
        for (int k = 0; k < d; ++k) p[k] = pts[i * static_cast<size_t>(d) + k];
        mu.add(p);
    }
    return mu;
}

} // namespace

struct bd_model {
    bulkdiff::CoefficientModel model;
};

extern "C" {

const char* bd_version(void) { return BULKDIFF_VERSION; }

const char* bd_last_error(void) { return g_last_error.c_str(); }

bd_status bd_model_create(const char* kind, double lambda, int threshold, double smoothing,
                          bd_model** out) {
    return guarded([&]() -> bd_status {
        if (!kind || !out) throw std::invalid_argument("null argument");
        *out = new bd_model{bulkdiff::CoefficientModel(
            bulkdiff::model_kind_from_string(kind), lambda, threshold, smoothing)};
        return BD_OK;
    });
}

void bd_model_destroy(bd_model* model) { delete model; }

bd_status bd_model_eval(const bd_model* model, int d, int torus, double side,
                        const double* pts, size_t npts, const double* x,
                        double* out_matrix) {
    return guarded([&]() -> bd_status {
        if (!model || !x || !out_matrix || (npts > 0 && !pts))
            throw std::invalid_argument("null argument");
        const bulkdiff::Configuration mu = make_config(d, torus, side, pts, npts);
        bulkdiff::Vec xv;
        for (int k = 0; k < d; ++k) xv[k] = x[k];
        const bulkdiff::SymMatrix a = model->model.evaluate(mu, xv);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                out_matrix[i * d + j] = a(i, j);
        return BD_OK;
    });
}

bd_status bd_sample_poisson(int d, int torus, double side, double rho, uint64_t seed,
                            uint64_t stream, int palm, double** out_pts,
                            size_t* out_count) {
    return guarded([&]() -> bd_status {
        if (!out_pts || !out_count) throw std::invalid_argument("null argument");
        bulkdiff::RandomStream rng(seed, stream);
        const bulkdiff::Domain dom = make_domain(d, torus, side);
        const bulkdiff::Configuration mu = palm ? bulkdiff::sample_palm(dom, rho, rng)
                                                : bulkdiff::sample_poisson(dom, rho, rng);
        const size_t n = mu.size();
        double* buf = static_cast<double*>(std::malloc(sizeof(double) * n * static_cast<size_t>(d)));
        if (!buf && n > 0) throw std::runtime_error("allocation failed");
        for (size_t i = 0; i < n; ++i)
            for (int k = 0; k < d; ++k)
                buf[i * static_cast<size_t>(d) + k] = mu.point(i)[k];
        *out_pts = buf;
        *out_count = n;
        return BD_OK;
    });
}

void bd_free(void* p) { std::free(p); }

bd_status bd_solve_cell(const char* spec_json, char** out_json) {
    return guarded([&]() -> bd_status {
        if (!spec_json || !out_json) throw std::invalid_argument("null argument");
        const nlohmann::json j = nlohmann::json::parse(spec_json);

        bulkdiff::CellProblemSpec spec;
        const int d = j.value("dimension", 1);
        spec.cell = bulkdiff::Domain::cube(d, j.value("m", 0));
        spec.rho = j.value("rho", 1.0);
        if (j.contains("model")) {
            const auto& m = j.at("model");
            spec.model = bulkdiff::CoefficientModel(
                bulkdiff::model_kind_from_string(m.value("kind", "identity")),
                m.value("lambda", 1.0), m.value("threshold", 2), m.value("smoothing", 0.25));
        }
        if (j.contains("direction")) {
            const auto dir = j.at("direction").get<std::vector<double>>();
            for (int k = 0; k < d && k < static_cast<int>(dir.size()); ++k)
                spec.direction[k] = dir[static_cast<std::size_t>(k)];
        } else {
            spec.direction = d == 1 ? bulkdiff::vec1(1.0) : bulkdiff::vec2(1.0, 0.0);
        }
        spec.samples = j.value("samples", std::size_t{4000});
        spec.eval_samples = j.value("eval_samples", std::size_t{0});
        spec.seed = j.value("seed", std::uint64_t{1});
        if (j.contains("max_points") && !j.at("max_points").is_null())
            spec.max_points = j.at("max_points").get<int>();
        if (j.contains("basis")) {
            const auto& b = j.at("basis");
            spec.basis.spacing = b.value("spacing", 0.0);
            if (b.contains("radii")) spec.basis.radii = b.at("radii").get<std::vector<double>>();
            if (b.contains("thresholds"))
                spec.basis.thresholds = b.at("thresholds").get<std::vector<int>>();
            spec.basis.interactions = b.value("interactions", true);
        }
        spec.workers = j.value("workers", 1);

        const std::string kind = j.value("kind", "nu");
        bulkdiff::CellSolution sol;
        if (kind == "nu")
            sol = bulkdiff::solve_nu(spec);
        else if (kind == "nu-star")
            sol = bulkdiff::solve_nu_star(spec);
        else if (kind == "resolvent")
            sol = bulkdiff::solve_resolvent(spec, j.value("lambda", 0.0));
        else
            throw std::invalid_argument("unknown cell problem kind: " + kind);

        *out_json = dup_string(sol.to_json());
        if (!*out_json) throw std::runtime_error("allocation failed");
        return BD_OK;
    });
}

bd_status bd_heat_kernel_density(const double* abar, int d, double t, const double* x,
                                 double* out_density) {
    return guarded([&]() -> bd_status {
        if (!abar || !x || !out_density) throw std::invalid_argument("null argument");
        bulkdiff::SymMatrix m;
        m.d = d;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m.at(i, j) = abar[i * d + j];
        const bulkdiff::HeatKernel hk(m, d);
        bulkdiff::Vec xv;
        for (int k = 0; k < d; ++k) xv[k] = x[k];
        *out_density = hk.density(t, xv);
        return BD_OK;
    });
}

bd_status bd_run(const char* command, const char* config_path_or_json,
                 const char* output_dir, int workers, int64_t seed_override,
                 double alpha_override, char** out_log) {
    if (!command) {
        set_error("null command");
        return BD_ERR_INVALID;
    }
    g_last_error.clear();
    std::ostringstream log;
    const bulkdiff::RunStatus st = bulkdiff::run_command(
        command, config_path_or_json ? config_path_or_json : "",
        output_dir ? output_dir : "", workers,
        seed_override >= 0 ? std::optional<std::uint64_t>(
                                 static_cast<std::uint64_t>(seed_override))
                           : std::nullopt,
        std::isnan(alpha_override) ? std::nullopt : std::optional<double>(alpha_override),
        log);
    if (out_log) *out_log = dup_string(log.str());
    if (st != bulkdiff::RunStatus::Ok) set_error(log.str());
    switch (st) {
    case bulkdiff::RunStatus::Ok: return BD_OK;
    case bulkdiff::RunStatus::ValidationError: return BD_ERR_INVALID;
    case bulkdiff::RunStatus::NumericError: return BD_ERR_NUMERIC;
    case bulkdiff::RunStatus::CheckFailed: return BD_ERR_CHECK_FAILED;
    }
    return BD_ERR_UNKNOWN;
}

void bd_string_free(char* s) { std::free(s); }

} // extern "C"
