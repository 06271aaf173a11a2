#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "geolift/ingestion.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace geolift;

namespace {

TimeSeriesTable table_with_missing(const Matrix& v, const std::vector<std::pair<int, int>>& missing) {
  std::vector<std::string> ents, stamps;
  for (Eigen::Index i = 0; i < v.rows(); ++i) ents.push_back("e" + std::to_string(i));
  for (Eigen::Index t = 0; t < v.cols(); ++t) stamps.push_back("t" + std::to_string(t));
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> obs =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(v.rows(), v.cols(), true);
  for (auto [i, t] : missing) obs(i, t) = false;
  return TimeSeriesTable(ents, stamps, v, obs);
}

}  // namespace

TEST_CASE("parse_edge_list: examples") {
  const auto path = parse_edge_list("a\tb\nb\tc");
  CHECK(path.labels == std::vector<std::string>{"a", "b", "c"});
  CHECK(path.matrix.kind() == MatrixKind::adjacency);
  CHECK(path.matrix(0, 1) == 1.0);
  CHECK(path.matrix(1, 2) == 1.0);
  CHECK(path.matrix(0, 2) == 0.0);
  CHECK(path.matrix.nonzeros_upper() == 2);

  const auto loop = parse_edge_list("a\ta");
  CHECK(loop.labels.size() == 1);
  CHECK(loop.matrix.nonzeros_upper() == 0);
  CHECK(loop.self_loops == 1);

  const auto dup = parse_edge_list("a\tb\na\tb\nb\ta\n");
  CHECK(dup.matrix.nonzeros_upper() == 1);
  CHECK(dup.matrix(0, 1) == 1.0);
  CHECK(dup.repeats == 2);
  CHECK(dup.matrix.kind() == MatrixKind::adjacency);
}

TEST_CASE("parse_edge_list: comments, CRLF, weights and policies") {
  const auto w = parse_edge_list("# header\r\nx\ty\t2.5\r\n\r\ny\tz\t1\r\n");
  CHECK(w.weighted);
  CHECK(w.matrix.kind() == MatrixKind::generic);
  CHECK(w.matrix(0, 1) == 2.5);

  const std::string repeated = "x\ty\t1.5\ny\tx\t2\n";
  CHECK(parse_edge_list(repeated, EdgePolicy::symmetrize_union).matrix(0, 1) == 3.5);
  CHECK_THROWS_AS(parse_edge_list(repeated, EdgePolicy::symmetrize_error), ValidationError);
  CHECK(parse_edge_list("x\ty\t2\ny\tx\t2\n", EdgePolicy::symmetrize_error).matrix(0, 1) == 2.0);
}

TEST_CASE("parse_edge_list: errors carry line numbers") {
  try {
    parse_edge_list("a\tb\n# fine\nonly-one-field\n");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_edge_list("a\tb\tnot-a-number\n"), ValidationError);
  CHECK_THROWS_AS(parse_edge_list("a\tb\t1\t2\n"), ValidationError);
  const std::vector<std::string> fixed{"a", "b"};
  CHECK_THROWS_AS(parse_edge_list("a\tc\n", EdgePolicy::symmetrize_union, fixed), ValidationError);
  const auto iso = parse_edge_list("b\ta\n", EdgePolicy::symmetrize_union, std::vector<std::string>{"a", "b", "c"});
  CHECK(iso.matrix.size() == 3);
  CHECK(iso.matrix(0, 1) == 1.0);
}

TEST_CASE("edge list round trip with a fixed vertex order") {
  const auto a = SimilarityMatrix::sparse(4, {{0, 2, 1}, {1, 3, 1}, {2, 3, 1}}, MatrixKind::adjacency);
  const std::vector<std::string> labels{"p", "q", "r", "s"};
  testutil::TempDir dir("edges");
  save_edge_list(dir.path() / "g.edges", a, labels);
  const auto back = load_edge_list(dir.path() / "g.edges", EdgePolicy::symmetrize_error, labels);
  CHECK(back.matrix.to_dense() == a.to_dense());
  CHECK(back.matrix.kind() == MatrixKind::adjacency);
}

TEST_CASE("parse_dense_matrix: examples") {
  const auto a = parse_dense_matrix("0,1\n1,0");
  CHECK(a.matrix.kind() == MatrixKind::adjacency);
  CHECK(a.matrix(0, 1) == 1.0);
  CHECK_FALSE(a.had_header);
  CHECK_THROWS_AS(parse_dense_matrix("0,1\n0.5,0"), ValidationError);
  const auto one = parse_dense_matrix("0");
  CHECK(one.matrix.size() == 1);

  const auto h = parse_dense_matrix("x,y\n1,0.5\n0.5,1\n");
  CHECK(h.had_header);
  CHECK(h.labels == std::vector<std::string>{"x", "y"});
  CHECK(h.matrix.kind() == MatrixKind::correlation);
}

TEST_CASE("parse_dense_matrix: specific errors") {
  CHECK_THROWS_AS(parse_dense_matrix("0,1,2\n1,0,3\n"), ValidationError);
  CHECK_THROWS_AS(parse_dense_matrix("0,1\n1,zero\n"), ValidationError);
  CHECK_THROWS_AS(parse_dense_matrix("0,1\n1\n"), ValidationError);
  CHECK_THROWS_AS(parse_dense_matrix("0,2\n2,0\n", MatrixKind::adjacency), ValidationError);
}

TEST_CASE("dense matrices round-trip bit-exactly") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  testutil::TempDir dir("dense");
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m(7, 7);
    for (auto& v : m.reshaped()) v = u(gen) * std::pow(10.0, static_cast<int>(u(gen)) % 40);
    m = (0.5 * (m + m.transpose())).eval();
    m(0, 1) = m(1, 0) = std::numeric_limits<double>::denorm_min();
    m(2, 3) = m(3, 2) = 0.1;
    const auto s = SimilarityMatrix::dense(m, MatrixKind::generic);
    save_dense_matrix(dir.path() / "m.csv", s);
    const auto back = load_dense_matrix(dir.path() / "m.csv", MatrixKind::generic);
    CHECK(back.matrix.to_dense() == m);
  }
  const auto adj = SimilarityMatrix::sparse(3, {{0, 1, 1}}, MatrixKind::adjacency);
  save_dense_matrix(dir.path() / "a.csv", adj, {"u", "v", "w"});
  const auto back = load_dense_matrix(dir.path() / "a.csv");
  CHECK(back.labels == std::vector<std::string>{"u", "v", "w"});
  CHECK(back.matrix.to_dense() == adj.to_dense());
  CHECK(back.matrix.kind() == MatrixKind::adjacency);
}

TEST_CASE("format_double and parse_double") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(*parse_double(format_double(v)) == v);
  }
  CHECK(*parse_double(" +4.5 ") == 4.5);
  CHECK_FALSE(parse_double("4.5x").has_value());
  CHECK_FALSE(parse_double("").has_value());
}

TEST_CASE("parse_csv: quoting") {
  const auto t = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\r\n1,2,3\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"a", "b,c", "say \"hi\""});
  CHECK(t.lines == std::vector<Index>{1, 3});
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("q\"") == "\"q\"\"\"");
}

TEST_CASE("correlation_matrix: examples") {
  Matrix v(4, 4);
  v << 1, 2, 3, 4,  //
      1, 3, 2, 4,   //
      1, 2, 3, 4,   //
      -1, -2, -3, -4;
  const auto c = correlation_matrix(table_with_missing(v, {}));
  CHECK(c.kind() == MatrixKind::correlation);
  CHECK(c(0, 1) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(c(0, 1) == doctest::Approx(oracle::pearson({1, 2, 3, 4}, {1, 3, 2, 4})).epsilon(1e-14));
  CHECK(c(0, 2) == 1.0);
  CHECK(c(0, 3) == -1.0);
  for (Index i = 0; i < 4; ++i) CHECK(c(i, i) == 1.0);
}

TEST_CASE("correlation_matrix: random tables satisfy correlation invariants") {
  const Matrix v = testutil::random_matrix(12, 30, 7);
  const auto c = correlation_matrix(table_with_missing(v, {}));
  const Matrix d = c.to_dense();
  CHECK(d == d.transpose());
  CHECK(d.maxCoeff() <= 1.0);
  CHECK(d.minCoeff() >= -1.0);
  for (Eigen::Index i = 0; i < 12; ++i) {
    for (Eigen::Index j = i + 1; j < 12; ++j) {
      std::vector<double> a, b;
      for (Eigen::Index t = 0; t < 30; ++t) {
        a.push_back(v(i, t));
        b.push_back(v(j, t));
      }
      CHECK(d(i, j) == doctest::Approx(oracle::pearson(a, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("correlation_matrix: errors") {
  Matrix v(2, 3);
  v << 1, 2, 3, 5, 5, 5;
  try {
    correlation_matrix(table_with_missing(v, {}));
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("e1") != std::string::npos);
  }
  v << 1, 2, 3, 4, 5, 7;
  CHECK_THROWS_AS(correlation_matrix(table_with_missing(v, {{0, 1}})), ValidationError);
}

TEST_CASE("drop_incomplete: examples") {
  const Matrix v = testutil::random_matrix(4, 6, 8);
  const auto same = drop_incomplete(table_with_missing(v, {}));
  CHECK(same.table.values() == v);
  CHECK(same.dropped_entities.empty());
  CHECK(same.dropped_timestamps.empty());

  std::vector<std::pair<int, int>> whole_entity;
  for (int t = 0; t < 6; ++t) whole_entity.push_back({2, t});
  const auto e = drop_incomplete(table_with_missing(v, whole_entity));
  CHECK(e.dropped_entities == std::vector<std::string>{"e2"});
  CHECK(e.dropped_timestamps.empty());
  CHECK(e.table.entities_count() == 3);

  std::vector<std::pair<int, int>> whole_stamp;
  for (int i = 0; i < 4; ++i) whole_stamp.push_back({i, 4});
  const auto s = drop_incomplete(table_with_missing(v, whole_stamp));
  CHECK(s.dropped_timestamps == std::vector<std::string>{"t4"});
  CHECK(s.dropped_entities.empty());
  CHECK(s.table.timestamps_count() == 5);
}

TEST_CASE("drop_incomplete: deterministic, complete and idempotent") {
  std::mt19937_64 gen(9);
  std::bernoulli_distribution miss(0.1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix v = testutil::random_matrix(8, 10, 100 + trial);
    std::vector<std::pair<int, int>> missing;
    for (int i = 0; i < 8; ++i)
      for (int t = 0; t < 10; ++t)
        if (miss(gen)) missing.push_back({i, t});
    const auto table = table_with_missing(v, missing);
    try {
      const auto r1 = drop_incomplete(table);
      const auto r2 = drop_incomplete(table);
      CHECK(r1.table.values() == r2.table.values());
      CHECK(r1.table.missing_count() == 0);
      const auto again = drop_incomplete(r1.table);
      CHECK(again.dropped_entities.empty());
      CHECK(again.dropped_timestamps.empty());
      CHECK(again.table.values() == r1.table.values());
    } catch (const DataError&) {
      // Everything removed: allowed outcome for dense missingness.
    }
  }
}

TEST_CASE("drop_incomplete: empty result is an error") {
  Matrix v = Matrix::Ones(1, 1);
  CHECK_THROWS_AS(drop_incomplete(table_with_missing(v, {{0, 0}})), DataError);
}

TEST_CASE("parse_time_series: empty cells are missing") {
  const auto t = parse_time_series("city,d1,d2,d3\nA,1.5,,3\nB,2,2.5,\"4\"\n");
  CHECK(t.entities() == std::vector<std::string>{"A", "B"});
  CHECK(t.timestamps() == std::vector<std::string>{"d1", "d2", "d3"});
  CHECK(t.missing_count() == 1);
  CHECK_FALSE(t.observed()(0, 1));
  CHECK(t.values()(1, 2) == 4.0);
  CHECK_THROWS_AS(parse_time_series("city,d1\nA,1,2\n"), ValidationError);
  CHECK_THROWS_AS(parse_time_series("city,d1\nA,abc\n"), ValidationError);
}

TEST_CASE("labelled points round-trip") {
  const PointCloud x(testutil::random_matrix(5, 3, 11));
  const std::vector<std::string> labels{"a", "b,c", "d", "e", "f"};
  const auto back = parse_points(format_points(x, labels, "x"));
  CHECK(back.labels == labels);
  CHECK(back.points.coords() == x.coords());
}
