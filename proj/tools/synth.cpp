// axe_synth: write a synthetic weight/calibration pair as AXT files.
//
// Weights are Gaussian with std 1/sqrt(K). Calibration inputs follow an AR(1)
// chain across the K input neurons (correlation --rho), optionally shifted and
// rectified to mimic post-ReLU activations.

#include <cmath>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "axe/tensor_io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Synthetic layer generator"};
    std::int64_t K = 64, C = 8, D = 256;
    std::uint64_t seed = 0;
    double rho = 0.6;
    bool relu = false;
    std::string weights_path, calib_path, dtype = "f64";
    app.add_option("--k", K, "input neurons")->check(CLI::PositiveNumber);
    app.add_option("--c", C, "output channels")->check(CLI::PositiveNumber);
    app.add_option("--d", D, "calibration samples")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--rho", rho, "neighbour correlation")->check(CLI::Range(-0.999, 0.999));
    app.add_flag("--relu", relu, "rectify calibration inputs");
    app.add_option("--dtype", dtype, "f32 | f64")->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--out-weights", weights_path, "K x C weights")->required();
    app.add_option("--out-calib", calib_path, "K x D activations")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd W(K, C), X(K, D);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(K));
    for (Eigen::Index c = 0; c < C; ++c)
        for (Eigen::Index k = 0; k < K; ++k) W(k, c) = sigma * normal(rng);
    const double innov = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index d = 0; d < D; ++d) {
        double prev = normal(rng);
        for (Eigen::Index k = 0; k < K; ++k) {
            if (k > 0) prev = rho * prev + innov * normal(rng);
            X(k, d) = relu ? std::max(0.0, prev + 0.3) : prev;
        }
    }

    const axe::DType t = dtype == "f32" ? axe::DType::f32 : axe::DType::f64;
    try {
        axe::write_axt(weights_path, axe::to_tensor(W, t));
        axe::write_axt(calib_path, axe::to_tensor(X, t));
    } catch (const std::exception& e) {
        std::cerr << "axe_synth: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
