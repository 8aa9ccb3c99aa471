// axe: accumulator-aware layer quantization from the command line.
//
// Exit codes: 0 success, 1 overflow certificate failed, 2 bad input or usage,
// 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "axe/axe.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kCertificateFailed = 1;
constexpr int kBadInput = 2;
constexpr int kNumerical = 3;

axe::json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw axe::FormatError(axe::FormatError::Kind::io, "cannot open '" + path + "'");
    try {
        return axe::json::parse(is);
    } catch (const axe::json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os || !(os << text)) throw axe::FormatError(axe::FormatError::Kind::io, "cannot write '" + path + "'");
}

struct QuantizeArgs {
    std::string weights, calib, config, out, report;
    std::optional<int> workers;
};

int run_quantize(const QuantizeArgs& a) {
    axe::LayerJob job;
    job.weights = axe::to_matrix(axe::read_axt(a.weights));
    job.calib_float = axe::to_matrix(axe::read_axt(a.calib));
    job.config = axe::config_from_json(read_json(a.config));
    if (a.workers) {
        job.config.workers = *a.workers;
        job.config.validate();
    }

    const axe::LayerResult res = axe::quantize_layer(job);
    axe::write_axt(a.out, axe::to_tensor(res.codes));

    axe::json report = axe::to_json(res.report);
    report["scales"] = std::vector<double>(res.scales.data(), res.scales.data() + res.scales.size());
    report["act_quantizer"] = {{"scale", res.act_quantizer.scale()},
                               {"zero_point", res.act_quantizer.zero_point()},
                               {"bits", res.act_quantizer.alphabet().bits}};
    const std::string text = report.dump(2) + "\n";
    if (a.report.empty()) std::cout << text;
    else write_text(a.report, text);

    if (!res.report.pass()) {
        std::cerr << "axe: overflow certificate failed for " << res.report.certificate->failures() << " unit(s)\n";
        return kCertificateFailed;
    }
    return kOk;
}

struct VerifyArgs {
    std::string codes, report, accumulator = "sign-magnitude";
    int acc_bits = 0, act_bits = 0;
    std::optional<std::int64_t> tile;
    bool act_signed = false;
};

int run_verify(const VerifyArgs& a) {
    const axe::CodeMatrix Q = axe::to_codes(axe::read_axt(a.codes));
    const axe::Alphabet act = a.act_signed ? axe::Alphabet::make_signed(a.act_bits) : axe::Alphabet::make_unsigned(a.act_bits);
    const auto budget =
        axe::AccumulatorBudget::register_only(a.acc_bits, act, a.tile, axe::int_repr_from_string(a.accumulator));

    std::optional<axe::Permutation> perm;
    if (!a.report.empty()) {
        const axe::json r = read_json(a.report);
        if (r.contains("certificate") && r["certificate"].is_object() && r["certificate"]["perm"].is_array())
            perm = r["certificate"]["perm"].get<axe::Permutation>();
    }
    const auto cert = axe::verify(Q, budget, perm);
    axe::json out = axe::to_json(cert);
    out["budget"].erase("limit_neg");
    out["budget"].erase("limit_pos");
    out["budget"].erase("slack");
    std::cout << out.dump(2) << "\n";
    return cert.pass() ? kOk : kCertificateFailed;
}

struct BoundsArgs {
    std::int64_t k = 0;
    int m = 0, n = 0;
    bool act_signed = false;
    std::optional<std::int64_t> tile;
};

int run_bounds(const BoundsArgs& a) {
    const int P = axe::min_accumulator_bits(a.k, a.m, a.n, a.act_signed);
    axe::json out;
    out["k"] = a.k;
    out["weight_bits"] = a.m;
    out["act_bits"] = a.n;
    out["act_signed"] = a.act_signed;
    out["acc_bits"] = P;
    out["l1_budget"] = axe::l1_budget(P, a.n);
    const auto lim = axe::strict_limits(P, a.n, 0.5);
    out["strict_limit"] = lim.pos;
    if (a.tile) {
        if (*a.tile < 1 || *a.tile > a.k) throw std::invalid_argument("--tile must lie in [1, k]");
        const int inner = axe::min_accumulator_bits(*a.tile, a.m, a.n, a.act_signed);
        out["tile"] = *a.tile;
        out["inner_acc_bits"] = inner;
        out["outer_acc_bits"] = axe::outer_accumulator_bits(inner, a.k, *a.tile);
    }
    std::cout << out.dump(2) << "\n";
    return kOk;
}

struct SweepArgs {
    std::string grid, out_csv;
};

// Grid file:
//   {"layers": [{"weights": "w.axt", "calib": "x.axt"}, ...],
//    "weight_bits": [...], "act_bits": [...], "acc_bits": [...],
//    "config": {...}}
// Relative paths resolve against the grid file's directory.
int run_sweep(const SweepArgs& a) {
    const axe::json g = read_json(a.grid);
    const fs::path root = fs::path(a.grid).parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (root / p).string(); };

    axe::SweepGrid grid;
    std::vector<axe::CalibPair> layers;
    try {
        for (const auto& l : g.at("layers"))
            layers.push_back({axe::to_matrix(axe::read_axt(resolve(l.at("weights").get<std::string>()))),
                              axe::to_matrix(axe::read_axt(resolve(l.at("calib").get<std::string>())))});
        grid.weight_bits = g.at("weight_bits").get<std::vector<int>>();
        grid.act_bits = g.at("act_bits").get<std::vector<int>>();
        grid.acc_bits = g.at("acc_bits").get<std::vector<int>>();
    } catch (const axe::json::exception& e) {
        throw std::invalid_argument(a.grid + ": " + e.what());
    }
    axe::json base = g.value("config", axe::json::object());
    if (!base.contains("acc_bits")) base["acc_bits"] = 32;
    grid.base = axe::config_from_json(base);
    if (layers.empty()) throw std::invalid_argument(a.grid + ": no layers");

    const auto rows = axe::sweep(layers, grid);
    std::ofstream os(a.out_csv);
    if (!os) throw axe::FormatError(axe::FormatError::Kind::io, "cannot write '" + a.out_csv + "'");
    axe::write_sweep_csv(os, rows);

    int code = kOk;
    for (const auto& r : rows) {
        if (r.status.rfind("error", 0) == 0) {
            std::cerr << "axe: sweep cell P=" << r.P << " M=" << r.M << " N=" << r.N << " failed: " << r.status << "\n";
            code = kBadInput;
        } else if (r.status == "ok" && !r.pass && grid.base.variant != axe::Variant::base && code == kOk) {
            code = kCertificateFailed;
        }
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Accumulator-aware post-training quantization"};
    app.require_subcommand(1);

    QuantizeArgs qa;
    auto* quantize = app.add_subcommand("quantize", "quantize one layer and certify it");
    quantize->add_option("--weights", qa.weights, "K x C weight tensor (AXT)")->required();
    quantize->add_option("--calib", qa.calib, "K x D calibration activations (AXT)")->required();
    quantize->add_option("--config", qa.config, "JSON config")->required();
    quantize->add_option("--out", qa.out, "output code tensor (AXT, i32)")->required();
    quantize->add_option("--report", qa.report, "JSON report path (stdout when absent)");
    quantize->add_option("--workers", qa.workers, "channel-level threads (overrides config)")->check(CLI::PositiveNumber);

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "check integer codes against an accumulator width");
    verify->add_option("--codes", va.codes, "K x C code tensor (AXT)")->required();
    verify->add_option("--acc-bits", va.acc_bits, "accumulator width P")->required()->check(CLI::Range(2, 62));
    verify->add_option("--act-bits", va.act_bits, "activation width N")->required()->check(CLI::Range(1, 30));
    verify->add_option("--tile", va.tile, "tile size T")->check(CLI::PositiveNumber);
    verify->add_flag("--act-signed", va.act_signed, "activations are signed");
    verify->add_option("--accumulator", va.accumulator, "sign-magnitude | twos-complement")
        ->check(CLI::IsMember({"sign-magnitude", "twos-complement"}));
    verify->add_option("--report", va.report, "quantize report supplying the accumulation order");

    BoundsArgs ba;
    auto* bounds = app.add_subcommand("bounds", "minimum accumulator width for a dot product");
    bounds->add_option("--k", ba.k, "dot-product length")->required()->check(CLI::PositiveNumber);
    bounds->add_option("--m", ba.m, "weight bits")->required()->check(CLI::Range(1, 30));
    bounds->add_option("--n", ba.n, "activation bits")->required()->check(CLI::Range(1, 30));
    bounds->add_flag("--signed", ba.act_signed, "activations are signed");
    bounds->add_option("--tile", ba.tile, "tile size T");

    SweepArgs sa;
    auto* sweep = app.add_subcommand("sweep", "run a (M, N, P) grid and mark the Pareto frontier");
    sweep->add_option("--grid", sa.grid, "JSON grid description")->required();
    sweep->add_option("--out-csv", sa.out_csv, "CSV output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kBadInput;
    }

    try {
        if (*quantize) return run_quantize(qa);
        if (*verify) return run_verify(va);
        if (*bounds) return run_bounds(ba);
        if (*sweep) return run_sweep(sa);
    } catch (const axe::NumericalError& e) {
        std::cerr << "axe: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "axe: " << e.what() << "\n";
        return kBadInput;
    }
    return kBadInput;
}
