#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "racglab/graph.hpp"
#include "racglab/group.hpp"
#include "racglab/walk.hpp"

namespace racglab {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kReportSchema = "ancona-report/1";

enum class ExperimentKind { MorseAxis, Barrier, Antipodal, Deviation, Martin, Control };

std::string kind_name(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view name);

struct ExperimentConfig {
  std::string graph_file;
  std::string measure_file;  // empty: uniform
  std::string output;        // record CSV path; summary goes next to it
  ExperimentKind kind = ExperimentKind::MorseAxis;

  std::string element;   // axis / skewering element g; empty asks barrier mode to search
  std::string wall;      // generator whose wall the skewering element must cross
  std::string barrier_mode = "skewer";  // skewer | local (f is the path letter at z)
  std::string mode = "narrow";          // antipodal: narrow | goodpoint
  std::string geodesic;                 // word read from e, the subset Y for antipodal runs
  std::size_t split = 0;                // index of z on Y; 0 picks the middle
  std::size_t narrow_s = 0;
  double k = 1.0;
  std::size_t r = 0;  // barrier radius
  int power = 1;      // f = g^power
  std::size_t d = 1, l = 2, good_r = 3;
  double theta = 0.5;
  int scale = 2;

  std::size_t min_length = 1, max_length = 10;  // window on d(x, y)
  int offsets = 6;           // control: z is pushed 0..offsets steps off the path
  int deviation_offset = 0;  // deviation: same push, 0..deviation_offset
  int max_r = -1;            // deviation sweep ceiling; negative means the ball radius
  std::vector<std::string> base_points;  // martin panel; empty means e and the letters of g
  int n_max = 8;

  int radius = 10;
  int steps = 200;
  double lazy = 0.0;
  std::size_t max_triples = 1000;
  std::size_t max_sources = 24;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  nlohmann::json to_json() const;
  // Overrides the fields present in j. Unknown keys throw ValidationError.
  void apply(const nlohmann::json& j);
  static ExperimentConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// Ball, measure and a row-caching solver shared by every triple of a run.
class Workspace {
 public:
  Workspace(const DefiningGraph& graph, MeasureSpec mu, int radius, int steps,
            unsigned threads = 1);

  const Group& group() const { return ball_->group; }
  const BallIndex& ball() const { return *ball_; }
  GreenSolver& solver() { return *solver_; }

 private:
  std::shared_ptr<const BallIndex> ball_;
  std::unique_ptr<GreenSolver> solver_;
};

struct TripleRecord {
  std::string x, z, y;
  std::size_t dxz = 0, dzy = 0;
  std::string role;  // axis | on-geodesic | barrier | control | narrow | good-point | deviation | martin
  int offset = 0;    // control push; martin exponent n
  double ratio = 0.0;  // deviation rows: R_1/2, NaN when never reached; martin rows: K
  int n_max = 0;
  double last_term = 0.0;   // largest last_term / value over the Green values used
  double tail_ratio = 0.0;  // largest fitted tail ratio over the same values

  friend bool operator==(const TripleRecord&, const TripleRecord&) = default;
};

struct TripleSpec {
  GroupElement x, z, y;
  std::string role;
  int offset = 0;
};

// Ancona ratios for every spec, sorted canonically. Rows are evaluated grouped
// by z and dropped once their group is done.
std::vector<TripleRecord> evaluate_triples(Workspace& ws, std::vector<TripleSpec> specs);

// Exhaustive when there are at most `max` candidates, otherwise a seeded
// round-robin draw across (d(x,z), d(z,y)) strata.
std::vector<TripleSpec> stratified_sample(const Group& group, std::vector<TripleSpec> candidates,
                                          std::size_t max, std::uint64_t seed);

// z and x drawn from `sources`, y anywhere in the ball, z on a geodesic from x to y.
std::vector<TripleSpec> on_geodesic_triples(const Workspace& ws,
                                            const std::vector<GroupElement>& sources,
                                            std::size_t min_length, std::size_t max_length,
                                            std::size_t max, std::uint64_t seed);

// First element of the search radius, in ShortLex order, of infinite order
// skewering the wall of (e, v).
GroupElement find_skewering_element(const Group& group, Letter v, int search_radius = 4);

struct ExperimentResult {
  std::vector<TripleRecord> records;
  nlohmann::json notes = nlohmann::json::object();
};

ExperimentResult exp_morse_axis(Workspace& ws, const ExperimentConfig& cfg);
ExperimentResult exp_barrier(Workspace& ws, const ExperimentConfig& cfg);
ExperimentResult exp_control(Workspace& ws, const ExperimentConfig& cfg);
ExperimentResult exp_antipodal(Workspace& ws, const ExperimentConfig& cfg);
ExperimentResult exp_deviation(Workspace& ws, const ExperimentConfig& cfg);
ExperimentResult exp_martin(Workspace& ws, const ExperimentConfig& cfg);
ExperimentResult run_experiment(Workspace& ws, const ExperimentConfig& cfg);

struct Bucket {
  std::string role;
  int offset = 0;
  std::size_t length = 0;  // d(x,z) + d(z,y)
  std::size_t count = 0;
  double min = 0.0, median = 0.0, max = 0.0;
};

struct ReportSummary {
  std::string kind;
  std::string manifest;  // config hash of the run that produced the records
  std::size_t count = 0;
  std::size_t flagged = 0;  // rows whose ratio is NaN
  double min = 0.0, median = 0.0, max = 0.0;
  std::vector<Bucket> buckets;
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json environment = nlohmann::json::object();
  nlohmann::json extras = nlohmann::json::object();

  nlohmann::json to_json() const;
  static ReportSummary from_json(const nlohmann::json& j);
};

nlohmann::json environment_fingerprint();

ReportSummary summarize(const std::vector<TripleRecord>& records,
                        const nlohmann::json& parameters = nlohmann::json::object(),
                        const nlohmann::json& notes = nlohmann::json::object());

inline constexpr const char* kRecordHeader =
    "x,z,y,dxz,dzy,role,offset,ratio,n_max,last_term,tail_ratio";

std::string records_to_csv(const std::vector<TripleRecord>& records, const std::string& manifest);
// Throws ValidationError naming the offending line.
std::vector<TripleRecord> records_from_csv(const std::string& text, std::string* manifest = nullptr);

struct RenderedReport {
  std::string svg;
  std::string markdown;
};
RenderedReport render_report(const ReportSummary& summary, const std::vector<TripleRecord>& records);

// Largest ratio per window of d(x,z) + d(z,y): keys "1-4", "5-8", ...
nlohmann::json max_ratio_by_window(const std::vector<TripleRecord>& records, std::size_t width = 4);
// Messages for every pinned window missing or outside the relative tolerance.
std::vector<std::string> compare_baseline(const nlohmann::json& pinned, const nlohmann::json& fresh,
                                          double tolerance = 0.10);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace racglab
