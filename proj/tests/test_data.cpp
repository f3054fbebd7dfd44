#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "llf/dataset.hpp"
#include "llf/rng.hpp"

using namespace llf;

TEST_CASE("dataset CSV round trips exactly") {
    TabularDataset data;
    data.feature_names = {"a", "b"};
    data.X.resize(3, 2);
    data.X << 0.1, -2.5e-9, 3.14159265358979312, 1e300, -0.0, 7.0;
    Eigen::VectorXd y(3);
    y << 1, 0, 1;
    data.labels = y;

    const std::string path = "dataset_roundtrip_test.csv";
    save_dataset_csv(data, path);
    const TabularDataset back = load_dataset_csv(path);
    std::remove(path.c_str());

    REQUIRE(back.size() == 3);
    REQUIRE(back.dim() == 2);
    CHECK(back.feature_names == data.feature_names);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) CHECK(back.X(i, j) == data.X(i, j));
    REQUIRE(back.has_labels());
    for (Eigen::Index i = 0; i < 3; ++i) CHECK((*back.labels)(i) == y(i));
}

TEST_CASE("malformed CSV rows are rejected") {
    const std::string path = "dataset_bad_test.csv";
    {
        std::ofstream out(path);
        out << "a,b\n1.0\n";
    }
    CHECK_THROWS(load_dataset_csv(path));
    {
        std::ofstream out(path);
        out << "a,b\n1.0,zzz\n";
    }
    CHECK_THROWS(load_dataset_csv(path));
    std::remove(path.c_str());
}

TEST_CASE("ratio split produces the documented sizes") {
    const SplitAssignment split = make_split(10, 4, 3, 3, 1);
    CHECK(split.count(Split::Train) == 4);
    CHECK(split.count(Split::Sim) == 3);
    CHECK(split.count(Split::Test) == 3);
}

TEST_CASE("splits replay with the same seed and differ across seeds") {
    const SplitAssignment a = make_split(200, 4, 3, 3, 7);
    const SplitAssignment b = make_split(200, 4, 3, 3, 7);
    const SplitAssignment c = make_split(200, 4, 3, 3, 8);
    CHECK(a.rows == b.rows);
    CHECK(a.rows != c.rows);
}

TEST_CASE("split rejects degenerate inputs") {
    CHECK_THROWS(make_split(2, 4, 3, 3, 0));
    CHECK_THROWS(make_split(10, 0, 3, 3, 0));
}

TEST_CASE("split files round trip") {
    const SplitAssignment split = make_split(25, 4, 3, 3, 3);
    const std::string path = "split_roundtrip_test.txt";
    save_split_file(split, path);
    const SplitAssignment back = load_split_file(path);
    std::remove(path.c_str());
    CHECK(back.rows == split.rows);
}

TEST_CASE("standardizer centers and scales on the fitted rows") {
    Eigen::MatrixXd X(4, 2);
    X << 1, 10, 3, 10, 5, 10, 7, 10;
    const Standardizer st = Standardizer::fit(X, {0, 1, 2, 3});
    const Eigen::MatrixXd T = st.transform(X);
    CHECK(T.col(0).mean() == doctest::Approx(0.0));
    CHECK(T.col(0).cwiseAbs2().mean() == doctest::Approx(1.0));
    // constant column passes through unscaled
    CHECK(T(0, 1) == doctest::Approx(0.0));
}
