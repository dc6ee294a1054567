#pragma once

// Seeded random inputs for property tests.

#include <Eigen/Dense>
#include <random>

namespace testgen {

struct Gen {
    explicit Gen(unsigned long long seed) : rng(seed) {}

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

    // dense irreducible generator, rates in [0.2, 2]
    Eigen::MatrixXd generator(int n) {
        Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                if (i != j) Q(i, j) = uniform(0.2, 2.0);
            Q(i, i) = -Q.row(i).sum();
        }
        return Q;
    }

    Eigen::VectorXd observable(int n) {
        Eigen::VectorXd f(n);
        for (int i = 0; i < n; ++i) f[i] = uniform(-1.0, 1.0);
        return f;
    }

    std::mt19937_64 rng;
};

}  // namespace testgen
