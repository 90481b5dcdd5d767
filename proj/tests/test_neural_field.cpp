#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "hemoflow/neural_field.hpp"

using namespace hemo;
using Catch::Approx;

TEST_CASE("parameter count follows sum(in*out + out) over layers") {
    CHECK(parameter_count({1, 1}) == 13);
    CHECK(parameter_count({2, 8}) == 8 * 4 + 8 + 8 * 8 + 8 + 4 * 8 + 4);
    CHECK(parameter_count({6, 256}) == 331268);
    CHECK_THROWS_AS(parameter_count({0, 16}), Error);
    CHECK_THROWS_AS(parameter_count({2, 0}), Error);
}

TEST_CASE("kaiming init is seed-deterministic with fan-in scaling") {
    NetworkArchitecture arch{3, 256};
    Mlp a = Mlp::kaiming_init(arch, 42);
    Mlp b = Mlp::kaiming_init(arch, 42);
    Mlp c = Mlp::kaiming_init(arch, 43);
    CHECK(a.params() == b.params());
    CHECK(a.params() != c.params());
    for (int l = 0; l <= arch.hidden_layers; ++l) {
        CHECK(a.bias(l).norm() == 0.0);
        Eigen::Map<const RowMat> w = a.weight(l);
        double mean = w.mean();
        double var = (w.array() - mean).square().mean();
        double expect = 2.0 / a.cols(l);
        INFO("layer " << l);
        CHECK(std::abs(mean) < 4.0 * std::sqrt(expect / (w.size())));
        CHECK(var == Approx(expect).epsilon(0.25));
    }
}

namespace {

// scalar-jet reference evaluation of the same parameters; structurally
// independent of the batched GEMM path
std::array<Jetd, 4> reference_jets(const Mlp& net, const Vec4& in) {
    std::vector<Jetd> act(4);
    for (int i = 0; i < 4; ++i) act[i] = Jetd::variable(in[i], i);
    int L = net.arch().hidden_layers;
    for (int l = 0; l <= L; ++l) {
        std::vector<Jetd> next(static_cast<std::size_t>(net.rows(l)));
        for (int r = 0; r < net.rows(l); ++r) {
            Jetd acc = Jetd::constant(net.bias(l)[r]);
            for (int c2 = 0; c2 < net.cols(l); ++c2) acc += act[c2] * net.weight(l)(r, c2);
            next[r] = l == L ? acc : swish(acc);
        }
        act = std::move(next);
    }
    return {act[0], act[1], act[2], act[3]};
}

}  // namespace

TEST_CASE("batched jet forward agrees with the scalar jet reference") {
    Mlp net = Mlp::kaiming_init({3, 16}, 7);
    std::vector<Vec4> inputs{{0.3, -0.8, 0.5, 0.1}, {-1.2, 0.4, 0.0, 0.9}, {2.0, 1.0, -0.5, -0.3}};
    Index B = static_cast<Index>(inputs.size());
    MatrixXd X = MatrixXd::Zero(4, kJetCols * B);
    for (Index p = 0; p < B; ++p) {
        X.col(kJetCols * p) = inputs[p];
        for (int i = 0; i < 4; ++i) X(i, kJetCols * p + 1 + i) = 1.0;
    }
    Mlp::JetCache cache;
    const MatrixXd& Y = net.jet_forward(X, cache);
    for (Index p = 0; p < B; ++p) {
        std::array<Jetd, 4> ref = reference_jets(net, inputs[p]);
        for (int o = 0; o < 4; ++o) {
            CHECK(Y(o, kJetCols * p) == Approx(ref[o].v).epsilon(1e-12).margin(1e-13));
            for (int i = 0; i < 4; ++i)
                CHECK(Y(o, kJetCols * p + 1 + i) ==
                      Approx(ref[o].g[i]).epsilon(1e-11).margin(1e-13));
            for (int k = 0; k < kJetHess; ++k)
                CHECK(Y(o, kJetCols * p + 5 + k) ==
                      Approx(ref[o].h[k]).epsilon(1e-10).margin(1e-12));
        }
    }
    CHECK(net.jet_points_evaluated() == 3);
}

TEST_CASE("plain forward matches the value channel of the jet path") {
    Mlp net = Mlp::kaiming_init({4, 24}, 19);
    MatrixXd X(4, 5);
    Rng rng(5);
    for (Index i = 0; i < X.size(); ++i) X(i % 4, i / 4) = rng.normal();
    Mlp::Cache cache;
    MatrixXd Y = net.forward(X, cache);
    CHECK(net.jet_points_evaluated() == 0);  // value path never touches jets

    MatrixXd Xs = MatrixXd::Zero(4, kJetCols * 5);
    for (Index p = 0; p < 5; ++p) Xs.col(kJetCols * p) = X.col(p);
    Mlp::JetCache jcache;
    const MatrixXd& Ys = net.jet_forward(Xs, jcache);
    for (Index p = 0; p < 5; ++p)
        CHECK((Y.col(p) - Ys.col(kJetCols * p)).norm() < 1e-13);
}

TEST_CASE("neural field derivatives match the finite difference probe") {
    ScaleSet scales{2.0, 30.0, 1333.0, 2.5, 0.1, Vec3(1.0, -0.5, 0.25)};
    NeuralField field({6, 64}, scales, 123);
    Vec3 x(1.3, -0.2, 0.8);
    double t = 0.4;
    DerivativeBundle jet = field.derivatives(x, t);
    DerivativeBundle fd = finite_difference_probe(field, x, t, 1e-3 * scales.length);
    double jac_scale = fd.jacobian.cwiseAbs().maxCoeff();
    for (int o = 0; o < 4; ++o)
        for (int i = 0; i < 4; ++i)
            CHECK(std::abs(jet.jacobian(o, i) - fd.jacobian(o, i)) < 1e-4 * jac_scale);
    double h_scale = 0.0;
    for (int o = 0; o < 4; ++o)
        for (int k = 0; k < kJetHess; ++k)
            h_scale = std::max(h_scale, std::abs(fd.second[o][k]));
    for (int o = 0; o < 4; ++o)
        for (int k = 0; k < kJetHess; ++k)
            CHECK(std::abs(jet.second[o][k] - fd.second[o][k]) < 1e-4 * h_scale);
}

TEST_CASE("value-path parameter gradients match finite differences") {
    Mlp net = Mlp::kaiming_init({2, 10}, 3);
    MatrixXd X(4, 6);
    Rng rng(8);
    for (Index i = 0; i < X.size(); ++i) X(i % 4, i / 4) = rng.normal();
    // loss = weighted sum of outputs
    MatrixXd W(4, 6);
    for (Index i = 0; i < W.size(); ++i) W(i % 4, i / 4) = rng.normal();

    Mlp::Cache cache;
    VectorXd grad = VectorXd::Zero(net.parameter_count());
    net.forward(X, cache);
    net.backward(cache, W, grad);

    auto loss = [&](const VectorXd& theta) {
        Mlp tmp = net;
        tmp.params() = theta;
        Mlp::Cache c2;
        return (tmp.forward(X, c2).array() * W.array()).sum();
    };
    double h = 1e-6;
    for (int k : {0, 7, 41, 90, net.parameter_count() - 1}) {
        VectorXd tp = net.params(), tm = net.params();
        tp[k] += h;
        tm[k] -= h;
        double fd = (loss(tp) - loss(tm)) / (2.0 * h);
        INFO("theta index " << k);
        CHECK(grad[k] == Approx(fd).epsilon(1e-6).margin(1e-10));
    }
}

TEST_CASE("jet-path parameter gradients match finite differences") {
    // functional mixing values, first and second derivatives across points
    ScaleSet scales{1.5, 12.0, 200.0, 1.0, 0.0, Vec3(0.2, 0.0, -0.1)};
    NeuralField field({3, 12}, scales, 31);
    std::vector<SpacetimePoint> pts{{Vec3(0.4, 0.3, -0.2), 0.1}, {Vec3(-0.3, 0.5, 0.6), 0.7}};

    std::vector<DerivativeBundle> adj(pts.size());
    adj[0].jacobian(0, 1) = 1.0;       // du/dy
    adj[0].second[2][jet_pack(2, 2)] = 0.5;  // d2w/dz2
    adj[0].value[3] = -0.25;           // p
    adj[1].jacobian(3, 0) = 2.0;       // dp/dx
    adj[1].second[0][jet_pack(0, 3)] = -1.5;  // d2u/dxdt
    adj[1].value[1] = 0.75;            // v

    auto functional = [&](NeuralField& f) {
        Mlp::JetCache cache;
        std::vector<DerivativeBundle> bs;
        f.bundles(pts, cache, bs);
        double acc = 0.0;
        acc += bs[0].jacobian(0, 1) * 1.0;
        acc += bs[0].second[2][jet_pack(2, 2)] * 0.5;
        acc += bs[0].value[3] * -0.25;
        acc += bs[1].jacobian(3, 0) * 2.0;
        acc += bs[1].second[0][jet_pack(0, 3)] * -1.5;
        acc += bs[1].value[1] * 0.75;
        return acc;
    };

    Mlp::JetCache cache;
    std::vector<DerivativeBundle> bs;
    field.bundles(pts, cache, bs);
    VectorXd grad = VectorXd::Zero(field.net().parameter_count());
    field.bundles_backward(cache, adj, grad);

    double h = 1e-6;
    for (int k : {0, 5, 33, 77, field.net().parameter_count() - 2}) {
        NeuralField fp = field, fm = field;
        fp.net().params()[k] += h;
        fm.net().params()[k] -= h;
        double fd = (functional(fp) - functional(fm)) / (2.0 * h);
        INFO("theta index " << k);
        CHECK(grad[k] == Approx(fd).epsilon(5e-5).margin(1e-9));
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "hf_ckpt_test";
    fs::create_directories(dir);
    std::string path = (dir / "net.ckpt").string();

    ScaleSet scales{4.0, 60.0, 100.0, 1.25, -0.5, Vec3(0.0, 0.25, 2.0)};
    NeuralField field({4, 64}, scales, 2024);
    save_checkpoint(field, path);
    NeuralField back = load_checkpoint(path);

    CHECK(back.net().params() == field.net().params());
    CHECK(back.scales().length == scales.length);
    CHECK(back.scales().t_min == scales.t_min);
    CHECK(back.scales().shift == scales.shift);
    Vec3 x(1.0, 0.2, 0.4);
    CHECK(back.evaluate(x, 0.3) == field.evaluate(x, 0.3));

    SECTION("wrong magic is a format error") {
        std::ofstream os(path, std::ios::binary);
        os << "{\"format\":\"something-else\"}\n";
        os.close();
        CHECK_THROWS_AS(load_checkpoint(path), Error);
    }
    SECTION("truncated blob is a format error") {
        save_checkpoint(field, path);
        fs::resize_file(path, fs::file_size(path) - 64);
        try {
            load_checkpoint(path);
            FAIL("expected format error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::format);
        }
    }
    SECTION("missing file is an io error") {
        try {
            load_checkpoint((dir / "nope.ckpt").string());
            FAIL("expected io error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::io);
        }
    }
    fs::remove_all(dir);
}
