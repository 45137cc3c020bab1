#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deephash/bitcode.hpp"
#include "deephash/dataio.hpp"

namespace deephash {

/// popcount(a xor b). Throws DimensionError on a K mismatch.
std::size_t hamming_distance(const BitCode& a, const BitCode& b);

struct RankingResult {
  std::size_t query = 0;
  /// Database indices by non-decreasing distance, ties by ascending index.
  std::vector<std::size_t> order;
  /// distances[r] and relevant[r] describe order[r].
  std::vector<std::uint32_t> distances;
  std::vector<bool> relevant;

  std::size_t relevant_count() const;
};

/// Relevance is label consensus; an unknown label on either side is never
/// relevant.
RankingResult rank_database(const BitCode& query, std::int32_t query_label,
                            const CodeDatabase& db, std::size_t query_index = 0);

/// Mean precision at the rank of each relevant item over the full ordering.
/// Empty when no database item is relevant.
std::optional<double> average_precision(const RankingResult& result);

struct MapReport {
  double map = 0.0;
  std::size_t evaluated = 0;
  /// Queries with no relevant database item.
  std::vector<std::size_t> excluded;
};

/// Throws EvaluationError when no query has a relevant item.
MapReport mean_average_precision(const CodeDatabase& queries, const CodeDatabase& db);

struct PRCurve {
  std::vector<std::size_t> rank;  // 1..n
  std::vector<double> recall;
  std::vector<double> precision;

  std::size_t size() const { return rank.size(); }
};

/// Precision and recall at every rank cut, averaged over the valid queries.
PRCurve precision_recall(const CodeDatabase& queries, const CodeDatabase& db);

struct MapRow {
  std::string method;
  std::size_t bits = 0;
  double map = 0.0;
};

/// Header "method,K,mAP".
void write_map_csv(const std::vector<MapRow>& rows, const std::filesystem::path& path);
/// Header "rank,recall,precision".
void write_pr_csv(const PRCurve& curve, const std::filesystem::path& path);

}  // namespace deephash
