#include <random>

#include <gtest/gtest.h>

#include "axe/optq.hpp"
#include "axe/oracle.hpp"
#include "support.hpp"

using namespace axe;

namespace {

std::vector<std::int64_t> as_vector(const CodeVector& q) { return {q.data(), q.data() + q.size()}; }

}  // namespace

TEST(Cholesky, UpperFactorAndPivotReport) {
    test::Rng rng(1);
    const Eigen::MatrixXd B = test::gaussian(rng, 6, 9);
    const Eigen::MatrixXd A = B * B.transpose();
    const Eigen::MatrixXd U = cholesky_upper(A);
    EXPECT_TRUE(U.isUpperTriangular());
    EXPECT_LE((U.transpose() * U - A).norm(), 1e-12 * A.norm());

    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(3, 3);
    S(2, 2) = -1.0;
    try {
        cholesky_upper(S);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.pivot(), 2);
    }
}

TEST(OptqPrepare, IdentityProxy) {
    const Eigen::MatrixXd Xq = std::sqrt(0.5) * Eigen::MatrixXd::Identity(5, 5);
    const auto f = optq_prepare(Xq);
    EXPECT_NEAR(f.eta, 0.01, 1e-15);
    EXPECT_EQ(f.perm, identity_permutation(5));
    for (Index i = 0; i < 5; ++i) EXPECT_NEAR(f.hinv_chol(i, i), 1.0 / std::sqrt(1.01), 1e-14);
    EXPECT_NEAR(f.hinv_chol.norm(), std::sqrt(5.0 / 1.01), 1e-13);
}

TEST(OptqPrepare, ZeroActivationsAreSingular) {
    EXPECT_THROW(optq_prepare(Eigen::MatrixXd::Zero(4, 8)), NumericalError);
}

TEST(OptqPrepare, FactorReconstructsDampedInverse) {
    test::Rng rng(2);
    const Eigen::MatrixXd Xq = test::gaussian(rng, 16, 64);
    const auto f = optq_prepare(Xq);
    EXPECT_TRUE(f.hinv_chol.isUpperTriangular());
    EXPECT_GT(f.hinv_chol.diagonal().minCoeff(), 0.0);

    const Eigen::MatrixXd H = 2.0 * Xq * Xq.transpose();
    EXPECT_NEAR(f.eta, 0.01 * H.diagonal().mean(), 1e-12);
    Eigen::MatrixXd Hp(16, 16);
    for (Index i = 0; i < 16; ++i)
        for (Index j = 0; j < 16; ++j) Hp(i, j) = H(f.perm[static_cast<std::size_t>(i)], f.perm[static_cast<std::size_t>(j)]);
    Hp.diagonal().array() += f.eta;
    const Eigen::MatrixXd inv = Hp.inverse();
    EXPECT_LE((f.hinv_chol.transpose() * f.hinv_chol - inv).norm(), 1e-8 * inv.norm());

    for (std::size_t i = 1; i < f.perm.size(); ++i) EXPECT_GE(H(f.perm[i - 1], f.perm[i - 1]), H(f.perm[i], f.perm[i]));
}

TEST(OptqPrepare, ConstantDiagonalKeepsNaturalOrder) {
    test::Rng rng(3);
    const Eigen::MatrixXd Xq = test::gaussian(rng, 10, 40).unaryExpr([](double v) { return v < 0 ? -1.0 : 1.0; });
    const auto f = optq_prepare(Xq);
    EXPECT_EQ(f.perm, identity_permutation(10));
}

TEST(Optq, OnGridWeightsAreExact) {
    test::Rng rng(4);
    const Eigen::MatrixXd Xq = test::gaussian(rng, 12, 50);
    const auto f = optq_prepare(Xq);
    std::uniform_int_distribution<int> code(-7, 7);
    Eigen::VectorXd w(12);
    std::vector<std::int64_t> expect;
    for (Index i = 0; i < 12; ++i) {
        expect.push_back(code(rng));
        w[i] = 0.5 * static_cast<double>(expect.back());
    }
    OptqTrace trace;
    EXPECT_EQ(as_vector(optq_channel(w, f, AffineQuantizer(0.5, 0, Alphabet::make_signed(4)), nullptr, false, &trace)),
              expect);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(trace.argument[i], trace.final_weights[i]);
}

TEST(Optq, MatchesSchurComplementForm) {
    test::Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        const Index K = 3 + t % 20;
        auto L = test::make_layer(rng, K, 1, 3 * K, 3 + t % 3, 4);
        const auto f = optq_prepare(L.Xq);
        const auto& wq = L.wq[0];
        const auto ref = test::optq_by_schur(L.W.col(0), L.Xq, wq.scale(), wq.alphabet(), f.perm);
        EXPECT_EQ(as_vector(optq_channel(L.W.col(0), f, wq)), ref) << "trial " << t;
    }
}

TEST(OptqAxe, MatchesSchurComplementTranscript) {
    test::Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        const Index K = 8 + t % 40;
        auto L = test::make_layer(rng, K, 1, 2 * K, 4, 4);
        const auto f = optq_prepare(L.Xq);
        const auto& wq = L.wq[0];
        const auto budget = AccumulatorBudget::make(9 + t % 4, L.act.alphabet(), RoundingMode::nearest());
        const bool soft = t % 2 == 1;
        double lambda = 0.0;
        if (soft) {
            Eigen::VectorXd permuted(K);
            for (Index i = 0; i < K; ++i) permuted[i] = L.W(f.perm[static_cast<std::size_t>(i)], 0) / wq.scale();
            test::projection_by_lambda_search(permuted, budget.soft_budget, &lambda);
        }
        const auto ref = test::optq_by_schur(L.W.col(0), L.Xq, wq.scale(), wq.alphabet(), f.perm, budget.limit_neg,
                                             budget.limit_pos, lambda);
        EXPECT_EQ(as_vector(optq_channel(L.W.col(0), f, wq, &budget, soft)), ref) << "trial " << t;
    }
}

TEST(Optq, QuantizedWeightsAreNeverRevisited) {
    test::Rng rng(7);
    auto L = test::make_layer(rng, 40, 1, 100, 4, 4);
    const auto f = optq_prepare(L.Xq);
    const auto budget = AccumulatorBudget::make(11, L.act.alphabet(), RoundingMode::nearest());
    OptqTrace trace;
    optq_channel(L.W.col(0), f, L.wq[0], &budget, true, &trace);
    for (std::size_t i = 0; i < trace.argument.size(); ++i) EXPECT_EQ(trace.argument[i], trace.final_weights[i]);
}

TEST(OptqAxe, LargeAccumulatorIsNoOp) {
    test::Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        auto L = test::make_layer(rng, 64, 4, 128, 4, 8);
        const auto f = optq_prepare(L.Xq);
        const auto budget = AccumulatorBudget::make(32, L.act.alphabet(), RoundingMode::nearest());
        EXPECT_EQ(optq_quantize_layer(L.W, f, L.wq, &budget, true), optq_quantize_layer(L.W, f, L.wq));
    }
}

TEST(OptqAxe, SmallLayerPassesOracle) {
    test::Rng rng(9);
    auto L = test::make_layer(rng, 16, 4, 64, 4, 4);
    const auto f = optq_prepare(L.Xq);
    const auto budget = AccumulatorBudget::make(14, L.act.alphabet(), RoundingMode::nearest());
    const CodeMatrix Q = optq_quantize_layer(L.W, f, L.wq, &budget, true);
    EXPECT_TRUE(verify(Q, budget, f.perm).pass());
    // 16 codes of magnitude <= 7 never reach B ~ 545, so nothing was clipped.
    EXPECT_EQ(Q, optq_quantize_layer(L.W, f, L.wq));
}

TEST(OptqAxe, TightBudgetTiledInPermutedOrder) {
    test::Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        auto L = test::make_layer(rng, 90, 5, 180, 4, 4);
        const auto f = optq_prepare(L.Xq);
        const auto budget = AccumulatorBudget::make(10, L.act.alphabet(), RoundingMode::nearest(), 32);
        const CodeMatrix Q = optq_quantize_layer(L.W, f, L.wq, &budget, true);
        const auto cert = verify(Q, budget, f.perm);
        EXPECT_TRUE(cert.pass());
        const TileLayout tiles(90, 32);
        for (Index c = 0; c < 5; ++c)
            for (Index tt = 0; tt < tiles.count(); ++tt) {
                const std::vector<Index> pos(f.perm.begin() + tiles.begin(tt), f.perm.begin() + tiles.end(tt));
                const auto [p, n] = test::signed_sums(Q.col(c), pos);
                EXPECT_LE(p * 15, 511);
                EXPECT_LE(n * 15, 511);
            }
    }
}

TEST(OptqLayer, WorkerCountDoesNotChangeCodes) {
    test::Rng rng(11);
    auto L = test::make_layer(rng, 32, 9, 64, 4, 4);
    const auto f = optq_prepare(L.Xq);
    const auto budget = AccumulatorBudget::make(11, L.act.alphabet(), RoundingMode::nearest());
    const CodeMatrix one = optq_quantize_layer(L.W, f, L.wq, &budget, true, 1);
    for (int w : {2, 4, 9}) EXPECT_EQ(optq_quantize_layer(L.W, f, L.wq, &budget, true, w), one);
}
