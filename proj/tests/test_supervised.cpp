#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "hfsnn/error.hpp"
#include "hfsnn/supervised.hpp"
#include "toy_data.hpp"

using namespace hfsnn;

namespace {

TrainConfig tiny_config() {
    TrainConfig c;
    c.n_hidden = 2;
    c.n_hidden_layers = 1;
    c.v_thresh = 0.5;
    c.beta = 0.9;
    return c;
}

double smooth_loss(const NetworkState& s, std::span<const std::uint8_t> in, std::size_t T, std::size_t label,
                   const TrainConfig& c) {
    const auto counts = forward_counts(s, in, T, SpikeFunction::kSmooth, c.surrogate_slope);
    return count_mse_loss(counts, label, T, c.target_hi, c.target_lo);
}

}  // namespace

TEST_CASE("surrogate derivative values") {
    CHECK(surrogate_grad(0.0, 25.0) == 1.0);
    CHECK(surrogate_grad(0.04, 25.0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(surrogate_grad(-0.04, 25.0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(surrogate_grad(1e6, 25.0) > 0.0);
    CHECK(surrogate_grad(1e6, 25.0) < 1e-12);
}

TEST_CASE("count loss plug-in values") {
    const std::vector<double> on_target{16, 4}, flipped{4, 16}, even{10, 10};
    CHECK(count_mse_loss(on_target, 0, 20, 0.8, 0.2) == 0.0);
    CHECK(count_mse_loss(flipped, 0, 20, 0.8, 0.2) == doctest::Approx(288.0));
    CHECK(count_mse_loss(even, 0, 20, 0.8, 0.2) == doctest::Approx(72.0));
    CHECK(count_mse_loss(even, 1, 20, 0.8, 0.2) == doctest::Approx(72.0));
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    WeightSet p{{0.1, -0.2, 0.3}, {0.7}};
    const WeightSet before = p;
    TrainConfig c;
    AdamState s = make_adam(p, c);
    const WeightSet zero{{0, 0, 0}, {0}};
    for (int i = 0; i < 10; ++i) adam_step(p, zero, s, 0.1);
    CHECK(p == before);
}

TEST_CASE("adam first step moves by the learning rate against the gradient sign") {
    WeightSet p{{0.0, 0.0}};
    TrainConfig c;
    AdamState s = make_adam(p, c);
    adam_step(p, {{2.0, -0.5}}, s, 0.01);
    CHECK(p[0][0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p[0][1] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("hard forward pass matches the engine") {
    TrainConfig c;
    c.n_hidden = 16;
    NetworkState s = make_supervised_network(5, c);
    std::mt19937_64 g(3);
    std::bernoulli_distribution b(0.5);
    SpikeTensor in(50, 5, 20);
    for (auto& x : in.data()) x = b(g);
    const std::vector<int> engine = infer_counts(s, in);
    for (std::size_t n = 0; n < 50; ++n) {
        const auto counts = forward_counts(s, in.timestamp(n), 20, SpikeFunction::kHeaviside, 25.0);
        CHECK(counts[0] == engine[2 * n]);
        CHECK(counts[1] == engine[2 * n + 1]);
    }
}

TEST_CASE("bptt gradient matches central differences on random tiny networks") {
    const TrainConfig c = tiny_config();
    std::mt19937_64 g(11);
    std::bernoulli_distribution b(0.6);
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        NetworkState s = init_network(Topology::model3(2, 2, 1, 2), c.lif(), trial);
        for (auto& grp : s.weights)
            for (double& x : grp) x = w(g);
        std::vector<std::uint8_t> in(2 * 4);
        for (auto& x : in) x = b(g);
        const std::size_t label = trial % 2;
        WeightSet grads{std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)};
        sample_gradient(s, in, 4, label, c, SpikeFunction::kSmooth, grads);
        const double h = 1e-5;
        for (std::size_t gi = 0; gi < 2; ++gi)
            for (std::size_t i = 0; i < 4; ++i) {
                NetworkState up = s, down = s;
                up.weights[gi][i] += h;
                down.weights[gi][i] -= h;
                const double fd = (smooth_loss(up, in, 4, label, c) - smooth_loss(down, in, 4, label, c)) / (2 * h);
                const double err = std::abs(fd - grads[gi][i]) / std::max(1e-6, std::max(std::abs(fd), std::abs(grads[gi][i])));
                worst = std::max(worst, err);
                CHECK(err <= 1e-3);
            }
    }
    MESSAGE("worst relative error " << worst);
}

TEST_CASE("parallel and serial batch gradients are identical") {
    TrainConfig c;
    c.n_hidden = 16;
    const auto toy = testing::separable_toy(100, 20, 4);
    const NetworkState s = make_supervised_network(2, c);
    std::vector<std::size_t> idx(100);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = (i * 37) % 100;
    const BatchGradient a = batch_gradient(s, toy.spikes, toy.labels, idx, c);
    const BatchGradient b = serial::batch_gradient(s, toy.spikes, toy.labels, idx, c);
    CHECK(a.grads == b.grads);
    CHECK(a.mean_loss == b.mean_loss);
}

TEST_CASE("learning rate zero is a strict no-op") {
    TrainConfig c;
    c.n_hidden = 16;
    c.learning_rate = 0.0;
    c.epochs = 3;
    const auto toy = testing::separable_toy(64, 20, 2);
    const NetworkState s = make_supervised_network(2, c);
    const SupervisedResult r = train_supervised(s, toy.spikes, toy.labels, c);
    CHECK(r.network.weights == s.weights);
}

TEST_CASE("separable toy set is learned and the loss falls early on") {
    TrainConfig c;
    c.n_hidden = 32;
    c.epochs = 50;
    c.batch_size = 16;
    c.learning_rate = 0.005;
    c.seed = 3;
    const auto toy = testing::separable_toy(128, 20, 9);
    const SupervisedResult r = train_supervised(make_supervised_network(2, c), toy.spikes, toy.labels, c);
    REQUIRE(r.history.size() == 50);
    for (std::size_t e = 1; e < 5; ++e) CHECK(r.history[e].mean_loss < r.history[e - 1].mean_loss);
    double best = 0.0;
    for (const auto& h : r.history) best = std::max(best, h.train_accuracy);
    CHECK(best >= 0.95);
    CHECK(r.history.back().epoch == 50);
}

TEST_CASE("unlabelled rows are skipped and bad labels rejected") {
    TrainConfig c;
    c.n_hidden = 8;
    c.epochs = 1;
    auto toy = testing::separable_toy(16, 10, 1);
    for (std::size_t i = 0; i < 16; i += 3) toy.labels[i] = kUnlabeled;
    CHECK_NOTHROW(train_supervised(make_supervised_network(2, c), toy.spikes, toy.labels, c));
    toy.labels[1] = 2;
    CHECK_THROWS_AS(train_supervised(make_supervised_network(2, c), toy.spikes, toy.labels, c), DataError);
    std::vector<std::uint8_t> none(16, kUnlabeled);
    CHECK_THROWS_AS(train_supervised(make_supervised_network(2, c), toy.spikes, none, c), DataError);
}

TEST_CASE("training is reproducible for a fixed seed") {
    TrainConfig c;
    c.n_hidden = 16;
    c.epochs = 2;
    c.seed = 77;
    const auto toy = testing::separable_toy(64, 20, 5);
    const auto a = train_supervised(make_supervised_network(2, c), toy.spikes, toy.labels, c);
    const auto b = train_supervised(make_supervised_network(2, c), toy.spikes, toy.labels, c);
    CHECK(a.network.weights == b.network.weights);
}

TEST_CASE("train config validation") {
    TrainConfig c;
    c.learning_rate = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.target_lo = 0.9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.learning_rate = 0.0;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("loss history csv") {
    const auto dir = testing::scratch_dir("loss");
    const std::vector<LossHistoryEntry> h{{1, 3.5, 0.5}, {2, 2.0, 0.75}};
    write_loss_history_csv(dir / "h.csv", h);
    std::ifstream in(dir / "h.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "epoch,mean_loss,train_accuracy");
    CHECK(first == "1,3.5,0.5");
}
