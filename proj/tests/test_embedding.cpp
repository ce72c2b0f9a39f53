#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "toolfuse/embedding.hpp"

using namespace toolfuse;

namespace {

double cosine_of(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return dot;
}

double row_norm(const EmbeddingMatrix& matrix, std::size_t row) {
  double total = 0.0;
  for (std::size_t d = 0; d < matrix.dim(); ++d) {
    total += static_cast<double>(matrix.row(row)[d]) * static_cast<double>(matrix.row(row)[d]);
  }
  return std::sqrt(total);
}

class ZeroProvider : public EmbeddingProvider {
 public:
  std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override {
    return std::vector<std::vector<float>>(texts.size(), std::vector<float>(16, 0.0f));
  }
  std::string model_id() const override { return "zeros"; }
};

EmbeddingMatrix random_matrix(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<float>> rows;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> row(dim);
    for (float& x : row) {
      x = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
    }
    rows.push_back(std::move(row));
    ids.push_back("t" + std::to_string(100 + i));
  }
  return EmbeddingMatrix(std::move(rows), std::move(ids), "random");
}

}  // namespace

TEST_CASE("embed_toolset normalizes one row per tool in order") {
  Toolset toolset({{"", "alpha", "alpha(x)", "Count words in text."},
                   {"", "beta", "beta(y)", "Sum a list of numbers."},
                   {"", "gamma", "gamma(z)", "Reverse a string value."}},
                  "t");
  MockEmbeddingProvider provider(64);
  EmbeddingMatrix matrix = embed_toolset(toolset, provider);
  REQUIRE(matrix.rows() == 3);
  CHECK(matrix.dim() == 64);
  CHECK(matrix.tool_ids() == std::vector<std::string>{"alpha", "beta", "gamma"});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(row_norm(matrix, i) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("identical doc texts embed to identical rows") {
  Toolset toolset({{"a1", "same", "same(x)", "One description."},
                   {"a2", "same", "same(x)", "One description."}},
                  "t");
  MockEmbeddingProvider provider(64);
  EmbeddingMatrix matrix = embed_toolset(toolset, provider);
  CHECK(matrix.cosine(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t d = 0; d < matrix.dim(); ++d) {
    CHECK(matrix.row(0)[d] == matrix.row(1)[d]);
  }
}

TEST_CASE("zero vectors from a provider are rejected") {
  Toolset toolset({{"", "a", "a()", "x"}}, "t");
  ZeroProvider provider;
  CHECK_THROWS_AS(embed_toolset(toolset, provider), ZeroVector);
}

TEST_CASE("top_k_neighbors: identical row ranks first with cosine 1") {
  std::vector<std::vector<float>> rows = {
      {1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f},
      {1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f},
      {0.0f, 1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f},
  };
  EmbeddingMatrix matrix(std::move(rows), {"a", "b", "c"}, "unit");
  auto neighbors = top_k_neighbors(matrix, 0, 2);
  REQUIRE(neighbors.size() == 2);
  CHECK(neighbors[0].first == "b");
  CHECK(neighbors[0].second == doctest::Approx(1.0));
  CHECK(neighbors[1].first == "c");
}

TEST_CASE("top_k_neighbors: orthogonal ties break by tool id") {
  std::vector<std::vector<float>> rows = {
      {1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f},
      {0.0f, 1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f},
      {0.0f, 0.0f, 1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f},
  };
  EmbeddingMatrix matrix(std::move(rows), {"e1", "e2", "e3"}, "unit");
  auto neighbors = top_k_neighbors(matrix, 0, 2);
  REQUIRE(neighbors.size() == 2);
  CHECK(neighbors[0].first == "e2");
  CHECK(neighbors[0].second == doctest::Approx(0.0));
  CHECK(neighbors[1].first == "e3");
  CHECK(neighbors[1].second == doctest::Approx(0.0));
}

TEST_CASE("top_k_neighbors equals the full-sort oracle on random instances") {
  for (std::uint64_t seed : {11u, 23u, 37u}) {
    EmbeddingMatrix matrix = random_matrix(10, 16, seed);
    for (std::size_t row = 0; row < matrix.rows(); ++row) {
      auto got = top_k_neighbors(matrix, row, 5);
      // Oracle: full neighbor list sorted independently.
      std::vector<std::pair<std::string, double>> oracle;
      for (std::size_t j = 0; j < matrix.rows(); ++j) {
        if (j != row) {
          oracle.emplace_back(matrix.tool_ids()[j], matrix.cosine(row, j));
        }
      }
      std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
          return a.second > b.second;
        }
        return a.first < b.first;
      });
      oracle.resize(5);
      REQUIRE(got.size() == oracle.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].first == oracle[i].first);
        CHECK(got[i].second == doctest::Approx(oracle[i].second).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("top_k_neighbors validates its inputs") {
  EmbeddingMatrix matrix = random_matrix(4, 8, 5);
  CHECK_THROWS_AS(top_k_neighbors(matrix, 9, 1), IndexOutOfRange);
  CHECK_THROWS_AS(top_k_neighbors(matrix, 0, 4), KTooLarge);
  CHECK_THROWS_AS(top_k_neighbors(matrix, 0, 0), KTooLarge);
}

TEST_CASE("mock_embed is deterministic and respects the dimension bound") {
  auto a = mock_embed("calculate the area", 64);
  auto b = mock_embed("calculate the area", 64);
  CHECK(a == b);
  CHECK_THROWS_AS(mock_embed("text", 4), InputError);
}

TEST_CASE("mock_embed golden cosines: shared 3-grams score high, disjoint score low") {
  auto similar = cosine_of(mock_embed("calculate_area triangle base height", 256),
                           mock_embed("calculate_triangle_area base height", 256));
  CHECK(similar > 0.6);
  CHECK(similar == doctest::Approx(0.8918918465).epsilon(1e-9));

  auto dissimilar = cosine_of(mock_embed("translate text", 256), mock_embed("send email", 256));
  CHECK(dissimilar < 0.4);
  CHECK(dissimilar == doctest::Approx(-0.0883883461).epsilon(1e-7));
}

TEST_CASE("cosine properties hold on random matrices") {
  EmbeddingMatrix matrix = random_matrix(12, 24, 99);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    CHECK(matrix.cosine(i, i) == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t j = 0; j < matrix.rows(); ++j) {
      CHECK(matrix.cosine(i, j) == doctest::Approx(matrix.cosine(j, i)).epsilon(1e-12));
      CHECK(std::abs(matrix.cosine(i, j)) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("top_k result is a prefix of the fully sorted neighbor list") {
  EmbeddingMatrix matrix = random_matrix(20, 16, 7);
  auto full = top_k_neighbors(matrix, 3, matrix.rows() - 1);
  for (std::size_t k = 1; k + 1 < matrix.rows(); ++k) {
    auto partial = top_k_neighbors(matrix, 3, k);
    REQUIRE(partial.size() == k);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(partial[i].first == full[i].first);
    }
  }
}

TEST_CASE("parallel_map preserves index order and propagates failures") {
  auto squares = parallel_map(100, 8, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < squares.size(); ++i) {
    CHECK(squares[i] == i * i);
  }
  CHECK_THROWS_AS(parallel_map(50, 8,
                               [](std::size_t i) -> int {
                                 if (i % 7 == 3) {
                                   throw InputError("boom");
                                 }
                                 return 0;
                               }),
                  InputError);
}
