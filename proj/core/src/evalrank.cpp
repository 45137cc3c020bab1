#include "deephash/evalrank.hpp"

#include <bit>
#include <fstream>
#include <iomanip>

#include "deephash/errors.hpp"

namespace deephash {

namespace {

void check_compatible(const CodeDatabase& queries, const CodeDatabase& db) {
  queries.validate();
  db.validate();
  if (queries.bits != db.bits) {
    throw DimensionError("query codes have K=" + std::to_string(queries.bits) +
                         " but database codes have K=" + std::to_string(db.bits));
  }
}

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

std::size_t hamming_distance(const BitCode& a, const BitCode& b) {
  if (a.size() != b.size()) {
    throw DimensionError("hamming distance between K=" + std::to_string(a.size()) + " and K=" +
                         std::to_string(b.size()));
  }
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t d = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) d += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  return d;
}

std::size_t RankingResult::relevant_count() const {
  std::size_t c = 0;
  for (bool r : relevant) c += r;
  return c;
}

RankingResult rank_database(const BitCode& query, std::int32_t query_label,
                            const CodeDatabase& db, std::size_t query_index) {
  RankingResult result;
  result.query = query_index;
  const std::size_t n = db.size();
  if (n == 0) return result;
  const std::size_t k = query.size();

  // Counting sort by distance; scanning the database in index order keeps
  // ties ascending.
  std::vector<std::uint32_t> dist(n);
  std::vector<std::size_t> bucket_start(k + 2, 0);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = static_cast<std::uint32_t>(hamming_distance(query, db.codes[i]));
    ++bucket_start[dist[i] + 1];
  }
  for (std::size_t d = 1; d < bucket_start.size(); ++d) bucket_start[d] += bucket_start[d - 1];
  result.order.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.order[bucket_start[dist[i]]++] = i;

  result.distances.resize(n);
  result.relevant.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = result.order[r];
    result.distances[r] = dist[i];
    result.relevant[r] = query_label != kUnknownLabel && db.labels[i] == query_label;
  }
  return result;
}

std::optional<double> average_precision(const RankingResult& result) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < result.relevant.size(); ++r) {
    if (!result.relevant[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

MapReport mean_average_precision(const CodeDatabase& queries, const CodeDatabase& db) {
  check_compatible(queries, db);
  MapReport report;
  double sum = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto ap = average_precision(rank_database(queries.codes[q], queries.labels[q], db, q));
    if (!ap) {
      report.excluded.push_back(q);
      continue;
    }
    sum += *ap;
    ++report.evaluated;
  }
  if (report.evaluated == 0) {
    throw EvaluationError("no query has a relevant database item (" +
                          std::to_string(queries.size()) + " queries, " +
                          std::to_string(db.size()) + " database items)");
  }
  report.map = sum / static_cast<double>(report.evaluated);
  return report;
}

PRCurve precision_recall(const CodeDatabase& queries, const CodeDatabase& db) {
  check_compatible(queries, db);
  const std::size_t n = db.size();
  std::vector<double> recall(n, 0.0);
  std::vector<double> precision(n, 0.0);
  std::size_t valid = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const RankingResult r = rank_database(queries.codes[q], queries.labels[q], db, q);
    const std::size_t total = r.relevant_count();
    if (total == 0) continue;
    ++valid;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      hits += r.relevant[i];
      recall[i] += static_cast<double>(hits) / static_cast<double>(total);
      precision[i] += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (valid == 0) throw EvaluationError("no query has a relevant database item");
  PRCurve curve;
  curve.rank.resize(n);
  curve.recall.resize(n);
  curve.precision.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    curve.rank[i] = i + 1;
    curve.recall[i] = recall[i] / static_cast<double>(valid);
    curve.precision[i] = precision[i] / static_cast<double>(valid);
  }
  return curve;
}

void write_map_csv(const std::vector<MapRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,K,mAP\n";
  for (const auto& row : rows) out << row.method << ',' << row.bits << ',' << row.map << '\n';
}

void write_pr_csv(const PRCurve& curve, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "rank,recall,precision\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << curve.rank[i] << ',' << curve.recall[i] << ',' << curve.precision[i] << '\n';
  }
}

}  // namespace deephash
