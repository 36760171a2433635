#pragma once

#include "mctrack/errors.hpp"
#include "mctrack/geometry.hpp"
#include "mctrack/roi.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace mctrack {

// ---------------------------------------------------------------------------
// MOT-style CSV files
//
// One row per detection:
//   frame,id,bb_left,bb_top,bb_width,bb_height,conf,class,visibility
// Frame indices are 1-based on disk and 0-based in memory. id is -1 for raw
// detections. Rows may carry 6 to 10 comma-separated fields; trailing world
// coordinates of 10-column files are ignored and written back as -1.
// ---------------------------------------------------------------------------

struct MotRow {
  int frame = 0;  // 0-based
  int id = -1;
  BoundingBox box;
  double conf = 1.0;
  int cls = -1;
  double visibility = -1.0;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& file,
                           std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(file + ":" + std::to_string(line_no) +
                    ": not a number: '" + s + "'");
  }
}

inline int parse_int(const std::string& s, const std::string& file,
                     std::size_t line_no) {
  const double v = parse_double(s, file, line_no);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw DataError(file + ":" + std::to_string(line_no) +
                    ": expected an integer: '" + s + "'");
  }
  return i;
}

inline bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) {
    return std::isspace(c);
  });
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::vector<MotRow> read_mot_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<MotRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::blank(line)) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() < 6 || fields.size() > 10) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 6-10 comma-separated fields, got " +
                      std::to_string(fields.size()));
    }
    MotRow row;
    const int disk_frame = detail::parse_int(fields[0], path, line_no);
    if (disk_frame < 1) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": frame index must be >= 1");
    }
    row.frame = disk_frame - 1;
    row.id = detail::parse_int(fields[1], path, line_no);
    row.box.left = detail::parse_double(fields[2], path, line_no);
    row.box.top = detail::parse_double(fields[3], path, line_no);
    row.box.width = detail::parse_double(fields[4], path, line_no);
    row.box.height = detail::parse_double(fields[5], path, line_no);
    if (!row.box.valid()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": box width and height must be positive");
    }
    if (fields.size() > 6) {
      row.conf = detail::parse_double(fields[6], path, line_no);
      if (row.conf < 0.0) row.conf = 1.0;  // MOT convention for "no score"
      if (row.conf > 1.0) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": confidence above 1");
      }
    }
    if (fields.size() > 7) row.cls = detail::parse_int(fields[7], path, line_no);
    if (fields.size() > 8)
      row.visibility = detail::parse_double(fields[8], path, line_no);
    rows.push_back(row);
  }
  return rows;
}

inline void write_mot_file(const std::string& path,
                           const std::vector<MotRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const MotRow& r : rows) {
    out << (r.frame + 1) << ',' << r.id << ','
        << detail::format_double(r.box.left) << ','
        << detail::format_double(r.box.top) << ','
        << detail::format_double(r.box.width) << ','
        << detail::format_double(r.box.height) << ','
        << detail::format_double(r.conf) << ',' << r.cls << ','
        << detail::format_double(r.visibility) << '\n';
  }
}

inline std::vector<Detection> detections_from_rows(
    const std::vector<MotRow>& rows) {
  std::vector<Detection> dets;
  dets.reserve(rows.size());
  for (const MotRow& r : rows) {
    dets.push_back(Detection{r.frame, r.box, r.conf, std::nullopt});
  }
  return dets;
}

/// Groups rows into per-id tracks with frames sorted ascending. A duplicated
/// (id, frame) pair is a data error.
inline std::vector<Track> tracks_from_rows(const std::vector<MotRow>& rows,
                                           int camera_id,
                                           const std::string& origin = "") {
  std::map<int, std::vector<MotRow>> by_id;
  for (const MotRow& r : rows) by_id[r.id].push_back(r);
  std::vector<Track> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, members] : by_id) {
    std::stable_sort(members.begin(), members.end(),
                     [](const MotRow& a, const MotRow& b) {
                       return a.frame < b.frame;
                     });
    Track t;
    t.camera_id = camera_id;
    t.track_id = id;
    for (const MotRow& r : members) {
      if (!t.detections.empty() && r.frame == t.last_frame()) {
        throw DataError(origin + ": id " + std::to_string(id) +
                        " appears twice in frame " +
                        std::to_string(r.frame + 1));
      }
      t.detections.push_back(Detection{r.frame, r.box, r.conf, std::nullopt});
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

inline std::vector<MotRow> rows_from_tracks(const std::vector<Track>& tracks) {
  std::vector<MotRow> rows;
  for (const Track& t : tracks) {
    for (const Detection& d : t.detections) {
      rows.push_back(MotRow{d.frame, t.track_id, d.box, d.confidence, -1, -1.0});
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const MotRow& a, const MotRow& b) {
                     if (a.frame != b.frame) return a.frame < b.frame;
                     return a.id < b.id;
                   });
  return rows;
}

// ---------------------------------------------------------------------------
// Feature sidecar files
//
// CSV rows `camera,frame,id,feat_0,...,feat_{d-1}`, one per MOT row of the
// companion file and in the same order. The id column mirrors the MOT id
// column; alignment is positional.
// ---------------------------------------------------------------------------

struct FeatureRow {
  int camera = 0;
  int frame = 0;  // 0-based
  int id = -1;
  FeatureVector feature;
};

inline std::vector<FeatureRow> read_feature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::blank(line)) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() < 4) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected camera,frame,id and at least one feature");
    }
    FeatureRow row;
    row.camera = detail::parse_int(fields[0], path, line_no);
    const int disk_frame = detail::parse_int(fields[1], path, line_no);
    if (disk_frame < 1) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": frame index must be >= 1");
    }
    row.frame = disk_frame - 1;
    row.id = detail::parse_int(fields[2], path, line_no);
    row.feature.resize(static_cast<Eigen::Index>(fields.size()) - 3);
    for (std::size_t i = 3; i < fields.size(); ++i) {
      row.feature[static_cast<Eigen::Index>(i - 3)] =
          detail::parse_double(fields[i], path, line_no);
    }
    if (!row.feature.allFinite()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": non-finite feature component");
    }
    if (dim < 0) dim = row.feature.size();
    if (row.feature.size() != dim) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": feature dimension changed mid-file");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_feature_file(const std::string& path,
                               const std::vector<FeatureRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const FeatureRow& r : rows) {
    out << r.camera << ',' << (r.frame + 1) << ',' << r.id;
    for (Eigen::Index i = 0; i < r.feature.size(); ++i) {
      out << ',' << detail::format_exact(r.feature[i]);
    }
    out << '\n';
  }
}

/// Zips a MOT file with its positional feature sidecar, attaching each
/// feature to its detection. Row counts and (frame, id) columns must agree.
inline std::vector<Detection> attach_features(
    const std::vector<MotRow>& rows, const std::vector<FeatureRow>& feats,
    const std::string& origin = "") {
  if (rows.size() != feats.size()) {
    throw DataError(origin + ": feature sidecar has " +
                    std::to_string(feats.size()) + " rows for " +
                    std::to_string(rows.size()) + " detections");
  }
  std::vector<Detection> dets;
  dets.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].frame != feats[i].frame || rows[i].id != feats[i].id) {
      throw DataError(origin + ": feature sidecar row " +
                      std::to_string(i + 1) +
                      " does not match its detection row");
    }
    dets.push_back(
        Detection{rows[i].frame, rows[i].box, rows[i].conf, feats[i].feature});
  }
  return dets;
}

// ---------------------------------------------------------------------------
// Binary PGM (P5) images; used for RoI masks. Pixel >= 128 means inside.
// ---------------------------------------------------------------------------

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  auto next_token = [&]() -> std::string {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {  // comment to end of line
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw DataError(path + ": truncated PGM header");
    return tok;
  };
  if (next_token() != "P5") throw DataError(path + ": not a binary PGM (P5)");
  GrayImage img;
  try {
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval > 255) throw DataError(path + ": only 8-bit PGM supported");
    if (img.width <= 0 || img.height <= 0) {
      throw DataError(path + ": bad dimensions");
    }
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    throw DataError(path + ": malformed PGM header");
  }
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw DataError(path + ": truncated PGM data");
  }
  return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

inline RoiMask mask_from_image(const GrayImage& img) {
  std::vector<std::uint8_t> inside(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    inside[i] = img.pixels[i] >= 128 ? 1 : 0;
  }
  return RoiMask(img.width, img.height, std::move(inside));
}

inline RoiMask read_roi_mask(const std::string& path) {
  return mask_from_image(read_pgm(path));
}

// ---------------------------------------------------------------------------
// Cross-camera result files (AI City submission style)
//
// One space-separated row per detection:
//   camera_id global_id frame_id xmin ymin width height -1 -1
// Frame indices are 1-based on disk.
// ---------------------------------------------------------------------------

struct MtmcRow {
  int camera = 0;
  int global_id = 0;
  int frame = 0;  // 0-based
  BoundingBox box;
};

inline std::vector<MtmcRow> read_mtmc_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<MtmcRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::blank(line)) continue;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    if (fields.size() < 7) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected at least 7 space-separated fields");
    }
    MtmcRow row;
    row.camera = detail::parse_int(fields[0], path, line_no);
    row.global_id = detail::parse_int(fields[1], path, line_no);
    const int disk_frame = detail::parse_int(fields[2], path, line_no);
    if (disk_frame < 1) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": frame index must be >= 1");
    }
    row.frame = disk_frame - 1;
    row.box.left = detail::parse_double(fields[3], path, line_no);
    row.box.top = detail::parse_double(fields[4], path, line_no);
    row.box.width = detail::parse_double(fields[5], path, line_no);
    row.box.height = detail::parse_double(fields[6], path, line_no);
    if (!row.box.valid()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": box width and height must be positive");
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_mtmc_file(const std::string& path,
                            const std::vector<MtmcRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const MtmcRow& r : rows) {
    out << r.camera << ' ' << r.global_id << ' ' << (r.frame + 1) << ' '
        << detail::format_double(r.box.left) << ' '
        << detail::format_double(r.box.top) << ' '
        << detail::format_double(r.box.width) << ' '
        << detail::format_double(r.box.height) << " -1 -1\n";
  }
}

/// Groups cross-camera rows into per-(camera, id) tracks.
inline std::vector<Track> tracks_from_mtmc_rows(
    const std::vector<MtmcRow>& rows, const std::string& origin = "") {
  std::map<std::pair<int, int>, std::vector<MtmcRow>> by_key;
  for (const MtmcRow& r : rows) by_key[{r.camera, r.global_id}].push_back(r);
  std::vector<Track> tracks;
  for (auto& [key, members] : by_key) {
    std::stable_sort(members.begin(), members.end(),
                     [](const MtmcRow& a, const MtmcRow& b) {
                       return a.frame < b.frame;
                     });
    Track t;
    t.camera_id = key.first;
    t.track_id = key.second;
    for (const MtmcRow& r : members) {
      if (!t.detections.empty() && r.frame == t.last_frame()) {
        throw DataError(origin + ": camera " + std::to_string(key.first) +
                        " id " + std::to_string(key.second) +
                        " appears twice in frame " +
                        std::to_string(r.frame + 1));
      }
      t.detections.push_back(Detection{r.frame, r.box, 1.0, std::nullopt});
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace mctrack
