#pragma once

#include "mctrack/assignment.hpp"
#include "mctrack/errors.hpp"
#include "mctrack/geometry.hpp"
#include "mctrack/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mctrack {

/// (camera_id, frame): tracking quality is judged per camera-frame slot, so
/// multi-camera inputs never cross-match boxes between cameras.
using FrameKey = std::pair<int, int>;

struct EvalReport {
  double idf1 = 1.0;
  double idp = 1.0;
  double idr = 1.0;
  double detection_precision = 1.0;
  double detection_recall = 1.0;
  std::int64_t idtp = 0;
  std::int64_t idfp = 0;
  std::int64_t idfn = 0;
};

namespace detail {

/// num/den with the vacuous-truth convention: an empty denominator scores a
/// perfect 1.0 (nothing required, nothing failed).
inline double safe_ratio(double num, double den) {
  return den > 0.0 ? num / den : 1.0;
}

/// Greedy one-to-one matching by descending IoU within one frame slot.
/// Returns the number of matched pairs.
inline int greedy_frame_matches(const std::vector<BoundingBox>& gt,
                                const std::vector<BoundingBox>& pred,
                                double iou_threshold) {
  struct Candidate {
    double overlap;
    int gi;
    int pi;
  };
  std::vector<Candidate> candidates;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const double o = iou(gt[g], pred[p]);
      if (o >= iou_threshold) {
        candidates.push_back({o, static_cast<int>(g), static_cast<int>(p)});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.overlap != b.overlap) return a.overlap > b.overlap;
              if (a.gi != b.gi) return a.gi < b.gi;
              return a.pi < b.pi;
            });
  std::vector<char> gt_used(gt.size(), 0), pred_used(pred.size(), 0);
  int matches = 0;
  for (const Candidate& c : candidates) {
    if (gt_used[c.gi] || pred_used[c.pi]) continue;
    gt_used[c.gi] = 1;
    pred_used[c.pi] = 1;
    matches += 1;
  }
  return matches;
}

inline std::map<FrameKey, std::vector<BoundingBox>> boxes_by_frame(
    const std::vector<Track>& tracks) {
  std::map<FrameKey, std::vector<BoundingBox>> out;
  for (const Track& t : tracks) {
    for (const Detection& d : t.detections) {
      out[{t.camera_id, d.frame}].push_back(d.box);
    }
  }
  return out;
}

/// Per-identity frame->box maps. Tracks sharing a track_id (e.g. one global
/// identity seen by several cameras) are merged into one identity.
inline std::map<int, std::map<FrameKey, BoundingBox>> identity_boxes(
    const std::vector<Track>& tracks, const char* which) {
  std::map<int, std::map<FrameKey, BoundingBox>> out;
  for (const Track& t : tracks) {
    for (const Detection& d : t.detections) {
      const auto [it, inserted] =
          out[t.track_id].insert({{t.camera_id, d.frame}, d.box});
      if (!inserted) {
        throw DataError(std::string(which) + " identity " +
                        std::to_string(t.track_id) +
                        " has two boxes in camera " +
                        std::to_string(t.camera_id) + " frame " +
                        std::to_string(d.frame));
      }
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Detection precision / recall
// ---------------------------------------------------------------------------

struct DetectionPr {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double precision() const {
    return detail::safe_ratio(static_cast<double>(tp),
                              static_cast<double>(tp + fp));
  }
  double recall() const {
    return detail::safe_ratio(static_cast<double>(tp),
                              static_cast<double>(tp + fn));
  }
};

/// Frame-by-frame greedy descending-IoU matching with a one-to-one
/// constraint; identities are ignored.
inline DetectionPr detection_pr(
    const std::map<FrameKey, std::vector<BoundingBox>>& gt,
    const std::map<FrameKey, std::vector<BoundingBox>>& pred,
    double iou_threshold = 0.5) {
  DetectionPr pr;
  for (const auto& [key, gt_boxes] : gt) {
    const auto it = pred.find(key);
    const int matched =
        it == pred.end()
            ? 0
            : detail::greedy_frame_matches(gt_boxes, it->second, iou_threshold);
    pr.tp += matched;
    pr.fn += static_cast<std::int64_t>(gt_boxes.size()) - matched;
    if (it != pred.end()) {
      pr.fp += static_cast<std::int64_t>(it->second.size()) - matched;
    }
  }
  for (const auto& [key, pred_boxes] : pred) {
    if (gt.find(key) == gt.end()) {
      pr.fp += static_cast<std::int64_t>(pred_boxes.size());
    }
  }
  return pr;
}

// ---------------------------------------------------------------------------
// Identity measures
// ---------------------------------------------------------------------------

/// IDF1/IDP/IDR under the optimal one-to-one truth-to-result identity
/// matching. The bipartite problem is augmented with one false-positive
/// dummy per predicted identity and one false-negative dummy per truth
/// identity, so the matching is always total; minimizing missed plus
/// spurious frames is equivalent to maximizing identity-true positives.
/// Detection precision/recall are computed alongside (identity-free).
inline EvalReport id_measures(const std::vector<Track>& gt,
                              const std::vector<Track>& pred,
                              double iou_threshold = 0.5) {
  const auto gt_ids = detail::identity_boxes(gt, "ground truth");
  const auto pred_ids = detail::identity_boxes(pred, "prediction");

  std::vector<const std::map<FrameKey, BoundingBox>*> truth, result;
  for (const auto& [id, boxes] : gt_ids) truth.push_back(&boxes);
  for (const auto& [id, boxes] : pred_ids) result.push_back(&boxes);
  const int nt = static_cast<int>(truth.size());
  const int nc = static_cast<int>(result.size());

  std::int64_t total_gt = 0, total_pred = 0;
  for (const auto* m : truth) total_gt += static_cast<std::int64_t>(m->size());
  for (const auto* m : result) {
    total_pred += static_cast<std::int64_t>(m->size());
  }

  // Overlap counts m(truth, result): frames where the two identities hold
  // sufficiently overlapping boxes.
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(std::max(nt, 1),
                                                  std::max(nc, 1));
  for (int t = 0; t < nt; ++t) {
    for (int c = 0; c < nc; ++c) {
      int count = 0;
      for (const auto& [key, box] : *truth[t]) {
        const auto it = result[c]->find(key);
        if (it != result[c]->end() && iou(box, it->second) >= iou_threshold) {
          count += 1;
        }
      }
      overlap(t, c) = static_cast<double>(count);
    }
  }

  std::int64_t idtp = 0;
  if (nt > 0 && nc > 0) {
    const int size = nt + nc;
    Eigen::MatrixXd cost(size, size);
    cost.setConstant(kForbidden);
    for (int t = 0; t < nt; ++t) {
      const double len_t = static_cast<double>(truth[t]->size());
      for (int c = 0; c < nc; ++c) {
        const double len_c = static_cast<double>(result[c]->size());
        cost(t, c) = len_t + len_c - 2.0 * overlap(t, c);
      }
      cost(t, nc + t) = len_t;  // identity goes unmatched: all frames missed
    }
    for (int c = 0; c < nc; ++c) {
      // prediction goes unmatched: all frames spurious
      cost(nt + c, c) = static_cast<double>(result[c]->size());
      for (int t = 0; t < nt; ++t) cost(nt + c, nc + t) = 0.0;
    }
    const Assignment solution = hungarian(cost);
    for (const auto& [row, col] : solution.pairs) {
      if (row < nt && col < nc) {
        idtp += static_cast<std::int64_t>(overlap(row, col));
      }
    }
  }

  EvalReport report;
  report.idtp = idtp;
  report.idfn = total_gt - idtp;
  report.idfp = total_pred - idtp;
  report.idf1 = detail::safe_ratio(
      2.0 * static_cast<double>(idtp),
      static_cast<double>(2 * idtp + report.idfp + report.idfn));
  report.idp = detail::safe_ratio(static_cast<double>(idtp),
                                  static_cast<double>(idtp + report.idfp));
  report.idr = detail::safe_ratio(static_cast<double>(idtp),
                                  static_cast<double>(idtp + report.idfn));

  const DetectionPr pr = detection_pr(detail::boxes_by_frame(gt),
                                      detail::boxes_by_frame(pred),
                                      iou_threshold);
  report.detection_precision = pr.precision();
  report.detection_recall = pr.recall();
  return report;
}

// ---------------------------------------------------------------------------
// Average precision at IoU 0.5
// ---------------------------------------------------------------------------

struct ScoredDetection {
  int camera_id = 0;
  int frame = 0;
  BoundingBox box;
  double score = 0.0;
};

/// 101-point interpolated average precision. Detections are ranked by
/// descending score (stable for ties) and greedily matched to the
/// highest-IoU unclaimed ground-truth box in their frame slot.
inline double ap_at_05(const std::map<FrameKey, std::vector<BoundingBox>>& gt,
                       std::vector<ScoredDetection> detections,
                       double iou_threshold = 0.5) {
  std::int64_t total_gt = 0;
  for (const auto& [key, boxes] : gt) {
    total_gt += static_cast<std::int64_t>(boxes.size());
  }
  if (total_gt == 0) return 0.0;

  std::stable_sort(detections.begin(), detections.end(),
                   [](const ScoredDetection& a, const ScoredDetection& b) {
                     return a.score > b.score;
                   });

  std::map<FrameKey, std::vector<char>> claimed;
  for (const auto& [key, boxes] : gt) {
    claimed[key] = std::vector<char>(boxes.size(), 0);
  }
  std::vector<char> is_tp;
  is_tp.reserve(detections.size());
  for (const ScoredDetection& det : detections) {
    const FrameKey key{det.camera_id, det.frame};
    const auto it = gt.find(key);
    int best = -1;
    double best_iou = iou_threshold;
    if (it != gt.end()) {
      std::vector<char>& used = claimed[key];
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (used[g]) continue;
        const double o = iou(it->second[g], det.box);
        if (o >= best_iou && (best < 0 || o > best_iou)) {
          best_iou = o;
          best = static_cast<int>(g);
        }
      }
      if (best >= 0) used[best] = 1;
    }
    is_tp.push_back(best >= 0);
  }

  std::vector<double> precision, recall;
  std::int64_t tp = 0;
  for (std::size_t k = 0; k < is_tp.size(); ++k) {
    if (is_tp[k]) tp += 1;
    precision.push_back(static_cast<double>(tp) /
                        static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) /
                     static_cast<double>(total_gt));
  }

  double ap = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = static_cast<double>(i) / 100.0;
    double best_p = 0.0;
    for (std::size_t k = 0; k < precision.size(); ++k) {
      if (recall[k] >= r) best_p = std::max(best_p, precision[k]);
    }
    ap += best_p;
  }
  return ap / 101.0;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct SequenceReport {
  std::string name;
  EvalReport report;
};

/// Mean of the per-sequence ratios; counts are summed.
inline EvalReport average_report(const std::vector<SequenceReport>& sequences) {
  EvalReport avg;
  if (sequences.empty()) return avg;
  avg.idf1 = avg.idp = avg.idr = 0.0;
  avg.detection_precision = avg.detection_recall = 0.0;
  for (const SequenceReport& s : sequences) {
    avg.idf1 += s.report.idf1;
    avg.idp += s.report.idp;
    avg.idr += s.report.idr;
    avg.detection_precision += s.report.detection_precision;
    avg.detection_recall += s.report.detection_recall;
    avg.idtp += s.report.idtp;
    avg.idfp += s.report.idfp;
    avg.idfn += s.report.idfn;
  }
  const double n = static_cast<double>(sequences.size());
  avg.idf1 /= n;
  avg.idp /= n;
  avg.idr /= n;
  avg.detection_precision /= n;
  avg.detection_recall /= n;
  return avg;
}

/// Machine-readable key=value report. Sequences appear in order, the
/// average row last under the reserved name "average"; doubles carry full
/// precision so a reload is lossless.
inline void write_report_file(const std::string& path,
                              const std::vector<SequenceReport>& sequences) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open report for writing: " + path);
  std::vector<SequenceReport> rows = sequences;
  rows.push_back({"average", average_report(sequences)});
  for (const SequenceReport& s : rows) {
    if (s.name.empty() || (s.name == "average" && &s != &rows.back())) {
      throw ConfigError("reserved or empty sequence name: " + s.name);
    }
    out << "sequence=" << s.name << "\n";
    out << "idf1=" << detail::format_exact(s.report.idf1) << "\n";
    out << "idp=" << detail::format_exact(s.report.idp) << "\n";
    out << "idr=" << detail::format_exact(s.report.idr) << "\n";
    out << "precision=" << detail::format_exact(s.report.detection_precision)
        << "\n";
    out << "recall=" << detail::format_exact(s.report.detection_recall)
        << "\n";
    out << "idtp=" << s.report.idtp << "\n";
    out << "idfp=" << s.report.idfp << "\n";
    out << "idfn=" << s.report.idfn << "\n";
  }
  if (!out) throw DataError("failed writing report: " + path);
}

/// Parses write_report_file output, returning every row (the trailing
/// "average" row included).
inline std::vector<SequenceReport> read_report_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  std::vector<SequenceReport> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no += 1;
    if (detail::blank(line)) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "sequence") {
      rows.push_back({value, EvalReport{}});
      continue;
    }
    if (rows.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": value before any sequence line");
    }
    EvalReport& r = rows.back().report;
    if (key == "idf1") {
      r.idf1 = detail::parse_double(value, path, line_no);
    } else if (key == "idp") {
      r.idp = detail::parse_double(value, path, line_no);
    } else if (key == "idr") {
      r.idr = detail::parse_double(value, path, line_no);
    } else if (key == "precision") {
      r.detection_precision = detail::parse_double(value, path, line_no);
    } else if (key == "recall") {
      r.detection_recall = detail::parse_double(value, path, line_no);
    } else if (key == "idtp") {
      r.idtp = detail::parse_int(value, path, line_no);
    } else if (key == "idfp") {
      r.idfp = detail::parse_int(value, path, line_no);
    } else if (key == "idfn") {
      r.idfn = detail::parse_int(value, path, line_no);
    } else {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": unknown key " + key);
    }
  }
  return rows;
}

/// Human-readable table: one row per sequence plus the average row.
inline std::string format_report_table(
    const std::vector<SequenceReport>& sequences) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %8s %8s %8s %8s %8s\n", "Seq", "IDF1",
                "IDP", "IDR", "Prec.", "Recall");
  out << buf;
  std::vector<SequenceReport> rows = sequences;
  rows.push_back({"Avg", average_report(sequences)});
  for (const SequenceReport& s : rows) {
    std::snprintf(buf, sizeof(buf), "%-12s %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                  s.name.c_str(), s.report.idf1, s.report.idp, s.report.idr,
                  s.report.detection_precision, s.report.detection_recall);
    out << buf;
  }
  return out.str();
}

}  // namespace mctrack
