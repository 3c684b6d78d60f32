#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odt/common.hpp"
#include "odt/trace.hpp"

namespace odt {

struct ErrorSample {
  Vec2 position;
  double predicted = 0.0;  // MBit/s
  double measured = 0.0;   // MBit/s
};

/// Region where the predictor is not trusted. a >= b > 0, alpha in [-pi/2, pi/2).
struct BlackSpotEllipse {
  Vec2 centroid;
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;
  double cluster_rmse = 0.0;
};

struct BlackSpotConfig {
  int n_clusters = 100;
  double rmse_max = 3.0;  // MBit/s
  double max_track_elimination = 0.20;
  double b_min = 10.0;  // m
  std::uint64_t seed = 1;
  int max_iter = 100;

  void validate() const;
};

struct ClusterInfo {
  Vec2 centroid;
  std::size_t members = 0;
  double rmse = 0.0;
};

struct BlackSpotMap {
  std::vector<BlackSpotEllipse> ellipses;
  std::vector<ClusterInfo> clusters;  // all k-means clusters
  std::vector<int> ellipse_cluster;   // cluster index of each ellipse
  double eliminated_fraction = 0.0;
};

// --- geometry ---------------------------------------------------------------

struct KMeansResult {
  std::vector<Vec2> centroids;
  std::vector<int> assignment;
  double inertia = 0.0;
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or max_iter is reached.
KMeansResult kmeans(std::span<const Vec2> points, int k, std::uint64_t seed, int max_iter = 100);

/// Principal-axis ellipse that covers every input point. The minor axis is
/// floored at b_min and a is never smaller than b.
BlackSpotEllipse fit_ellipse(std::span<const Vec2> points, double b_min = 10.0);

/// Rotated-ellipse membership; the boundary counts as inside.
bool contains(const BlackSpotEllipse& e, Vec2 p);
bool in_any_black_spot(const BlackSpotMap& map, Vec2 p);

// --- detection --------------------------------------------------------------

/// Result of clustering once; thresholds can then be applied cheaply.
struct ClusterAnalysis {
  KMeansResult kmeans;
  std::vector<ClusterInfo> clusters;
  std::vector<BlackSpotEllipse> candidates;  // one per non-empty cluster, indexed like clusters
  std::vector<std::vector<Vec2>> tracks;
  std::vector<double> segment_length;
  std::vector<std::vector<std::size_t>> covered_segments;  // per cluster
  double track_length = 0.0;
};

/// `tracks` are the driven polylines used for the eliminated-fraction
/// measure; when empty, the sample positions in order form a single track.
ClusterAnalysis analyze_clusters(std::span<const ErrorSample> samples, const BlackSpotConfig& config,
                                 std::span<const std::vector<Vec2>> tracks = {});

BlackSpotMap select_black_spots(const ClusterAnalysis& analysis, double rmse_max, double max_track_elimination);

BlackSpotMap detect_black_spots(std::span<const ErrorSample> samples, const BlackSpotConfig& config,
                                std::span<const std::vector<Vec2>> tracks = {});

struct TradeoffRow {
  double rmse_max = 0.0;
  double eliminated_fraction = 0.0;
  std::size_t ellipses = 0;
  std::size_t samples_outside = 0;
  std::optional<double> r2;
  double rmse = 0.0;
  bool degenerate = false;  // fewer than 2 samples outside all ellipses
};

std::vector<TradeoffRow> tradeoff_curve(std::span<const ErrorSample> samples, const BlackSpotConfig& config,
                                        std::span<const double> thresholds,
                                        std::span<const std::vector<Vec2>> tracks = {});

// --- dwell statistics -------------------------------------------------------

struct DwellStats {
  std::vector<double> durations;  // s, one per contiguous in-spot interval
  std::vector<double> distances;  // m
  double total_time = 0.0;
  double total_distance = 0.0;
};

struct DwellReport {
  std::vector<DwellStats> per_operator;
  DwellStats best_of_operators;  // inside only when inside for every operator
};

DwellReport dwell_statistics(const Trace& trace, std::span<const BlackSpotMap> maps);

/// (value, cumulative probability) pairs of the empirical CDF.
std::vector<std::pair<double, double>> ecdf(std::vector<double> values);

// --- files ------------------------------------------------------------------

void save_black_spots(const BlackSpotMap& map, const std::filesystem::path& path);
BlackSpotMap load_black_spots(const std::filesystem::path& path);
std::string format_black_spots(const BlackSpotMap& map);

}  // namespace odt
