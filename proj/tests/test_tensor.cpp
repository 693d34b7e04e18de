#include "doctest.h"

#include <cmath>
#include <vector>

#include "mo3tr/tensor.hpp"
#include "oracles.hpp"

using namespace mo3tr;

TEST_CASE("matmul identity and zero cases") {
    Tensor eye = Tensor::from_values(2, 2, {1, 0, 0, 1});
    Tensor m = Tensor::from_values(2, 2, {3, 4, 5, 6});
    Tensor r = matmul(eye, m);
    CHECK(r.at(0, 0) == 3.0);
    CHECK(r.at(0, 1) == 4.0);
    CHECK(r.at(1, 0) == 5.0);
    CHECK(r.at(1, 1) == 6.0);

    Tensor a = Tensor::from_values(1, 2, {1, 2});
    Tensor z = Tensor::from_values(2, 1, {0, 0});
    CHECK(matmul(a, z).scalar_value() == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(7);
    Tensor a = Tensor::randn(3, 4, rng, 1.0);
    Tensor b = Tensor::randn(4, 2, rng, 1.0);
    auto got = oracle::to_mat(matmul(a, b));
    auto want = oracle::naive_matmul(oracle::to_mat(a), oracle::to_mat(b));
    CHECK(oracle::max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros(2, 3);
    Tensor b = Tensor::zeros(2, 3);
    try {
        matmul(a, b);
        FAIL("expected dimension error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Dimension);
        CHECK(std::string(e.what()).find("2x3") != std::string::npos);
    }
}

TEST_CASE("softmax_rows basics") {
    Tensor u = softmax_rows(Tensor::from_values(1, 3, {1, 1, 1}));
    for (int j = 0; j < 3; ++j) CHECK(u.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Tensor v = softmax_rows(Tensor::from_values(1, 2, {0.0, std::log(2.0)}));
    CHECK(v.at(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(v.at(0, 1) == doctest::Approx(2.0 / 3).epsilon(1e-12));

    // large equal logits must not overflow
    Tensor w = softmax_rows(Tensor::from_values(1, 2, {1000.0, 1000.0}));
    CHECK(w.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax_rows rows sum to one and are permutation equivariant") {
    Rng rng(11);
    Tensor x = Tensor::randn(5, 7, rng, 3.0);
    Tensor y = softmax_rows(x);
    for (int i = 0; i < y.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < y.cols(); ++j) {
            s += y.at(i, j);
            CHECK(y.at(i, j) >= 0.0);
        }
        CHECK(std::fabs(s - 1.0) < 1e-9);
    }

    // permute columns of one row, outputs permute identically
    std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
    std::vector<double> permuted(7);
    for (int j = 0; j < 7; ++j) permuted[j] = x.at(0, perm[j]);
    Tensor yp = softmax_rows(Tensor::from_values(1, 7, permuted));
    for (int j = 0; j < 7; ++j)
        CHECK(yp.at(0, j) == doctest::Approx(y.at(0, perm[j])).epsilon(1e-12));
}

TEST_CASE("elementwise ops and oracle") {
    Tensor r = relu(Tensor::from_values(1, 2, {-1, 2}));
    CHECK(r.at(0, 0) == 0.0);
    CHECK(r.at(0, 1) == 2.0);

    Rng rng(3);
    Tensor a = Tensor::randn(4, 5, rng, 2.0);
    Tensor b = Tensor::randn(4, 5, rng, 2.0);
    Tensor s = add(a, b);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(std::fabs(s.at(i, j) - (a.at(i, j) + b.at(i, j))) < 1e-12);

    CHECK_THROWS_AS(add(a, Tensor::zeros(4, 4)), Error);
}

TEST_CASE("layer_norm of constant vector is zero before scale and shift") {
    Tensor x = Tensor::full(1, 8, 3.25);
    Tensor gain = Tensor::full(1, 8, 1.0);
    Tensor bias = Tensor::zeros(1, 8);
    Tensor y = layer_norm(x, gain, bias);
    for (int j = 0; j < 8; ++j) CHECK(std::fabs(y.at(0, j)) < 1e-12);
}

TEST_CASE("layer_norm normalizes rows") {
    Rng rng(5);
    Tensor x = Tensor::randn(3, 16, rng, 4.0);
    Tensor gain = Tensor::full(1, 16, 1.0);
    Tensor bias = Tensor::zeros(1, 16);
    Tensor y = layer_norm(x, gain, bias);
    for (int i = 0; i < 3; ++i) {
        double mu = 0.0, var = 0.0;
        for (int j = 0; j < 16; ++j) mu += y.at(i, j);
        mu /= 16;
        for (int j = 0; j < 16; ++j) var += (y.at(i, j) - mu) * (y.at(i, j) - mu);
        var /= 16;
        CHECK(std::fabs(mu) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("backward on sum gives ones, on sum of squares gives 2x") {
    Tensor x = Tensor::from_values(1, 2, {1, 2}, true);
    {
        Tape tape;
        backward(sum_all(x));
        CHECK(x.grad()[0] == 1.0);
        CHECK(x.grad()[1] == 1.0);
    }
    x.zero_grad();
    {
        Tape tape;
        backward(sum_all(mul(x, x)));
        CHECK(x.grad()[0] == 2.0);
        CHECK(x.grad()[1] == 4.0);
    }
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::zeros(2, 2, true);
    Tape tape;
    Tensor y = add(x, x);
    CHECK_THROWS_AS(backward(y), Error);
}

TEST_CASE("three-layer MLP gradients match finite differences") {
    Rng rng(42);
    Tensor x = Tensor::randn(2, 6, rng, 1.0);
    Tensor w1 = Tensor::randn(6, 8, rng, 0.5, true);
    Tensor b1 = Tensor::randn(1, 8, rng, 0.1, true);
    Tensor w2 = Tensor::randn(8, 8, rng, 0.5, true);
    Tensor b2 = Tensor::randn(1, 8, rng, 0.1, true);
    Tensor w3 = Tensor::randn(8, 3, rng, 0.5, true);
    Tensor b3 = Tensor::randn(1, 3, rng, 0.1, true);
    Tensor coeff = Tensor::randn(2, 3, rng, 1.0);

    auto loss_fn = [&]() {
        Tensor h1 = relu(add_row_bias(matmul(x, w1), b1));
        Tensor h2 = relu(add_row_bias(matmul(h1, w2), b2));
        Tensor out = add_row_bias(matmul(h2, w3), b3);
        return sum_all(mul(out, coeff));
    };
    auto res = oracle::check_gradients({w1, b1, w2, b2, w3, b3}, loss_fn);
    CHECK(res.coords_checked > 0);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("every differentiable op passes finite differences") {
    Rng rng(99);

    auto check_unary = [&](auto op, double lo, double hi, const char* name) {
        Tensor a = Tensor::zeros(3, 4, true);
        for (double& v : a.mutable_values()) v = rng.uniform(lo, hi);
        Tensor c = Tensor::randn(3, 4, rng, 1.0);
        auto res = oracle::check_gradients(
            {a}, [&]() { return sum_all(mul(op(a), c)); });
        INFO(name);
        CHECK(res.max_rel_err < 1e-4);
    };
    check_unary([](const Tensor& t) { return relu(t); }, -2, 2, "relu");
    check_unary([](const Tensor& t) { return abs_elems(t); }, -2, 2, "abs_elems");
    check_unary([](const Tensor& t) { return sigmoid(t); }, -3, 3, "sigmoid");
    check_unary([](const Tensor& t) { return log_elems(t); }, 0.2, 4, "log_elems");
    check_unary([](const Tensor& t) { return mul_scalar(t, -1.7); }, -2, 2, "mul_scalar");
    check_unary([](const Tensor& t) { return add_scalar(t, 0.3); }, -2, 2, "add_scalar");
    check_unary([](const Tensor& t) { return softmax_rows(t); }, -2, 2, "softmax_rows");
    check_unary([](const Tensor& t) { return log_softmax_rows(t); }, -2, 2, "log_softmax_rows");

    {
        Tensor a = Tensor::randn(3, 4, rng, 1.0, true);
        Tensor c = Tensor::randn(4, 3, rng, 1.0);
        auto res = oracle::check_gradients(
            {a}, [&]() { return sum_all(mul(transpose(a), c)); });
        CHECK(res.max_rel_err < 1e-4);
    }
    {
        Tensor a = Tensor::randn(4, 4, rng, 1.0, true);
        Tensor cr = Tensor::randn(2, 4, rng, 1.0);
        auto res = oracle::check_gradients(
            {a}, [&]() { return sum_all(mul(slice_rows(a, 1, 3), cr)); });
        CHECK(res.max_rel_err < 1e-4);
        Tensor cc = Tensor::randn(4, 2, rng, 1.0);
        res = oracle::check_gradients(
            {a}, [&]() { return sum_all(mul(slice_cols(a, 0, 2), cc)); });
        CHECK(res.max_rel_err < 1e-4);
    }

    auto check_binary = [&](auto op, const char* name) {
        Tensor a = Tensor::randn(3, 4, rng, 1.0, true);
        Tensor b = Tensor::zeros(3, 4, true);
        for (double& v : b.mutable_values()) v = rng.uniform(0.5, 2.0);
        Tensor c = Tensor::randn(3, 4, rng, 1.0);
        auto res = oracle::check_gradients(
            {a, b}, [&]() { return sum_all(mul(op(a, b), c)); });
        INFO(name);
        CHECK(res.max_rel_err < 1e-4);
    };
    check_binary([](const Tensor& x, const Tensor& y) { return add(x, y); }, "add");
    check_binary([](const Tensor& x, const Tensor& y) { return sub(x, y); }, "sub");
    check_binary([](const Tensor& x, const Tensor& y) { return mul(x, y); }, "mul");
    check_binary([](const Tensor& x, const Tensor& y) { return divide(x, y); }, "divide");
    check_binary([](const Tensor& x, const Tensor& y) { return minimum(x, y); }, "minimum");
    check_binary([](const Tensor& x, const Tensor& y) { return maximum(x, y); }, "maximum");

    {
        Tensor a = Tensor::randn(3, 5, rng, 1.0, true);
        Tensor b = Tensor::randn(5, 2, rng, 1.0, true);
        Tensor c = Tensor::randn(3, 2, rng, 1.0);
        auto res = oracle::check_gradients(
            {a, b}, [&]() { return sum_all(mul(matmul(a, b), c)); });
        CHECK(res.max_rel_err < 1e-4);
    }
    {
        Tensor x = Tensor::randn(3, 6, rng, 2.0, true);
        Tensor gain = Tensor::randn(1, 6, rng, 0.5, true);
        Tensor bias = Tensor::randn(1, 6, rng, 0.5, true);
        Tensor c = Tensor::randn(3, 6, rng, 1.0);
        auto res = oracle::check_gradients(
            {x, gain, bias}, [&]() { return sum_all(mul(layer_norm(x, gain, bias), c)); });
        CHECK(res.max_rel_err < 1e-4);
    }
    {
        Tensor x = Tensor::randn(3, 4, rng, 1.0, true);
        Tensor b = Tensor::randn(1, 4, rng, 1.0, true);
        Tensor c = Tensor::randn(3, 4, rng, 1.0);
        auto res = oracle::check_gradients(
            {x, b}, [&]() { return sum_all(mul(add_row_bias(x, b), c)); });
        CHECK(res.max_rel_err < 1e-4);
    }
    {
        Tensor a = Tensor::randn(2, 4, rng, 1.0, true);
        Tensor b = Tensor::randn(3, 4, rng, 1.0, true);
        Tensor c = Tensor::randn(5, 4, rng, 1.0);
        auto res = oracle::check_gradients({a, b}, [&]() {
            std::vector<Tensor> parts = {a, b};
            return sum_all(mul(concat_rows(parts), c));
        });
        CHECK(res.max_rel_err < 1e-4);
    }
    {
        Tensor a = Tensor::randn(3, 2, rng, 1.0, true);
        Tensor b = Tensor::randn(3, 3, rng, 1.0, true);
        Tensor c = Tensor::randn(3, 5, rng, 1.0);
        auto res = oracle::check_gradients({a, b}, [&]() {
            std::vector<Tensor> parts = {a, b};
            return sum_all(mul(concat_cols(parts), c));
        });
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("backward is deterministic") {
    Rng rng(17);
    Tensor x = Tensor::randn(4, 4, rng, 1.0, true);
    Tensor w = Tensor::randn(4, 4, rng, 1.0, true);

    auto run = [&]() {
        x.zero_grad();
        w.zero_grad();
        Tape tape;
        Tensor y = softmax_rows(matmul(x, w));
        backward(sum_all(mul(y, y)));
        std::vector<double> gs(x.grad().begin(), x.grad().end());
        gs.insert(gs.end(), w.grad().begin(), w.grad().end());
        return gs;
    };
    auto g1 = run();
    auto g2 = run();
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("non-finite results raise numeric errors naming the op") {
    Tensor z = Tensor::zeros(1, 1);
    try {
        log_elems(z);
        FAIL("expected numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("log_elems") != std::string::npos);
    }
}
