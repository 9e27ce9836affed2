#pragma once

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "tcclust/context.hpp"
#include "tcclust/types.hpp"

namespace tcc {

enum class Encoding { text, binary };

// Features are persisted as float32; records built in memory should hold float-representable
// values (see quantize_features) for write/read to be exact.
struct Dataset {
  std::size_t dim = 0;
  std::size_t tracklet_length = 10;
  std::int64_t frames = 0;
  Encoding encoding = Encoding::text;
  std::vector<TrackletRecord> records;

  bool has_truth() const {
    for (const auto& r : records)
      if (!r.truth_label) return false;
    return !records.empty();
  }
};

inline void quantize_features(Vector& v) {
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

class ParseError : public DataError {
 public:
  ParseError(const std::string& where, const std::string& what)
      : DataError(where + ": " + what) {}
};

namespace detail {

inline std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline bool valid_label(const std::string& s) {
  if (s.empty() || s == "-") return false;
  for (char ch : s)
    if (std::isspace(static_cast<unsigned char>(ch))) return false;
  return true;
}

template <class T>
void put_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is, std::size_t& offset) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
    throw ParseError("byte offset " + std::to_string(offset), "unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  offset += sizeof(T);
  return value;
}

template <class T>
T parse_number(std::string_view tok, const std::string& where, const char* field) {
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for doubles is not universally available; strtod is locale-free enough here
    std::string s(tok);
    char* end = nullptr;
    value = static_cast<T>(std::strtod(s.c_str(), &end));
    if (s.empty() || end != s.c_str() + s.size())
      throw ParseError(where, std::string("bad ") + field + " value '" + s + "'");
  } else {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw ParseError(where, std::string("bad ") + field + " value '" + std::string(tok) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

inline constexpr std::string_view kDatasetMagic = "tcclust-dataset 1";

inline void write_dataset(const Dataset& data, std::ostream& os) {
  for (const auto& r : data.records) {
    if (r.features.size() != data.dim)
      throw DataError("write_dataset: tracklet " + std::to_string(r.id) + " has " +
                      std::to_string(r.features.size()) + " features, header says " +
                      std::to_string(data.dim));
    if (r.truth_label && !detail::valid_label(*r.truth_label))
      throw DataError("write_dataset: label of tracklet " + std::to_string(r.id) +
                      " must be non-empty, not '-', and contain no whitespace");
  }
  if (!is_sorted_records(data.records)) throw DataError("write_dataset: records are not sorted");

  os << kDatasetMagic << '\n'
     << "dim " << data.dim << '\n'
     << "tracklet_length " << data.tracklet_length << '\n'
     << "frames " << data.frames << '\n'
     << "encoding " << (data.encoding == Encoding::text ? "text" : "binary") << '\n'
     << "records " << data.records.size() << '\n'
     << "end_header\n";

  if (data.encoding == Encoding::text) {
    for (const auto& r : data.records) {
      os << r.id << ' ' << r.start_frame << ' ' << r.end_frame;
      if (r.spatial_center)
        os << ' ' << detail::format_double((*r.spatial_center)[0], 17) << ' '
           << detail::format_double((*r.spatial_center)[1], 17);
      else
        os << " - -";
      os << ' ' << (r.prev_distance ? detail::format_double(*r.prev_distance, 17) : "-");
      os << ' ' << (r.truth_label ? *r.truth_label : "-");
      for (double v : r.features) os << ' ' << detail::format_double(static_cast<float>(v), 9);
      os << '\n';
    }
  } else {
    for (const auto& r : data.records) {
      detail::put_le<std::int64_t>(os, r.id);
      detail::put_le<std::int64_t>(os, r.start_frame);
      detail::put_le<std::int64_t>(os, r.end_frame);
      std::uint8_t flags = (r.spatial_center ? 1 : 0) | (r.prev_distance ? 2 : 0) | (r.truth_label ? 4 : 0);
      detail::put_le<std::uint8_t>(os, flags);
      if (r.spatial_center) {
        detail::put_le<double>(os, (*r.spatial_center)[0]);
        detail::put_le<double>(os, (*r.spatial_center)[1]);
      }
      if (r.prev_distance) detail::put_le<double>(os, *r.prev_distance);
      if (r.truth_label) {
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.truth_label->size()));
        os.write(r.truth_label->data(), static_cast<std::streamsize>(r.truth_label->size()));
      }
      for (double v : r.features) detail::put_le<float>(os, static_cast<float>(v));
    }
  }
}

inline Dataset read_dataset(std::istream& is) {
  Dataset data;
  std::size_t offset = 0;
  std::size_t line_no = 0;
  auto where = [&] { return "line " + std::to_string(line_no); };
  auto next_line = [&](std::string& line) {
    if (!std::getline(is, line)) return false;
    ++line_no;
    offset += line.size() + 1;
    return true;
  };

  std::string line;
  if (!next_line(line) || line != kDatasetMagic) throw ParseError("line 1", "missing dataset magic line");
  std::optional<std::size_t> n_records;
  bool have_dim = false;
  bool have_encoding = false;
  for (;;) {
    if (!next_line(line)) throw ParseError(where(), "unexpected end of header");
    if (line == "end_header") break;
    const auto tok = detail::split_ws(line);
    if (tok.size() != 2) throw ParseError(where(), "malformed header line '" + line + "'");
    if (tok[0] == "dim") {
      data.dim = detail::parse_number<std::size_t>(tok[1], where(), "dim");
      have_dim = true;
    } else if (tok[0] == "tracklet_length") {
      data.tracklet_length = detail::parse_number<std::size_t>(tok[1], where(), "tracklet_length");
    } else if (tok[0] == "frames") {
      data.frames = detail::parse_number<std::int64_t>(tok[1], where(), "frames");
    } else if (tok[0] == "encoding") {
      if (tok[1] == "text") data.encoding = Encoding::text;
      else if (tok[1] == "binary") data.encoding = Encoding::binary;
      else throw ParseError(where(), "unknown encoding '" + std::string(tok[1]) + "'");
      have_encoding = true;
    } else if (tok[0] == "records") {
      n_records = detail::parse_number<std::size_t>(tok[1], where(), "records");
    } else {
      throw ParseError(where(), "unknown header key '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_dim || data.dim == 0) throw ParseError(where(), "header lacks a positive dim");
  if (!have_encoding) throw ParseError(where(), "header lacks encoding");
  if (!n_records) throw ParseError(where(), "header lacks records");

  data.records.reserve(*n_records);
  if (data.encoding == Encoding::text) {
    for (std::size_t r = 0; r < *n_records; ++r) {
      if (!next_line(line))
        throw ParseError("byte offset " + std::to_string(offset),
                         "truncated file: expected " + std::to_string(*n_records) + " records, got " +
                             std::to_string(r));
      const auto tok = detail::split_ws(line);
      TrackletRecord rec;
      if (tok.size() < 7) throw ParseError(where(), "record has too few fields");
      rec.id = detail::parse_number<std::int64_t>(tok[0], where(), "id");
      if (tok.size() != 7 + data.dim)
        throw ParseError(where(), "dimension mismatch at tracklet id " + std::to_string(rec.id) + ": " +
                                      std::to_string(tok.size() - 7) + " feature values, header dim " +
                                      std::to_string(data.dim));
      rec.start_frame = detail::parse_number<std::int64_t>(tok[1], where(), "start_frame");
      rec.end_frame = detail::parse_number<std::int64_t>(tok[2], where(), "end_frame");
      if ((tok[3] == "-") != (tok[4] == "-")) throw ParseError(where(), "half-specified spatial centre");
      if (tok[3] != "-")
        rec.spatial_center = std::array<double, 2>{detail::parse_number<double>(tok[3], where(), "cx"),
                                                   detail::parse_number<double>(tok[4], where(), "cy")};
      if (tok[5] != "-") rec.prev_distance = detail::parse_number<double>(tok[5], where(), "dist");
      if (tok[6] != "-") rec.truth_label = std::string(tok[6]);
      rec.features.resize(data.dim);
      for (std::size_t d = 0; d < data.dim; ++d)
        rec.features[d] = static_cast<double>(
            static_cast<float>(detail::parse_number<double>(tok[7 + d], where(), "feature")));
      data.records.push_back(std::move(rec));
    }
  } else {
    for (std::size_t r = 0; r < *n_records; ++r) {
      TrackletRecord rec;
      rec.id = detail::get_le<std::int64_t>(is, offset);
      rec.start_frame = detail::get_le<std::int64_t>(is, offset);
      rec.end_frame = detail::get_le<std::int64_t>(is, offset);
      const auto flags = detail::get_le<std::uint8_t>(is, offset);
      if (flags & ~7u) throw ParseError("byte offset " + std::to_string(offset - 1), "bad record flags");
      if (flags & 1) {
        const double cx = detail::get_le<double>(is, offset);
        const double cy = detail::get_le<double>(is, offset);
        rec.spatial_center = std::array<double, 2>{cx, cy};
      }
      if (flags & 2) rec.prev_distance = detail::get_le<double>(is, offset);
      if (flags & 4) {
        const auto len = detail::get_le<std::uint32_t>(is, offset);
        std::string label(len, '\0');
        is.read(label.data(), len);
        if (is.gcount() != static_cast<std::streamsize>(len))
          throw ParseError("byte offset " + std::to_string(offset), "unexpected end of file");
        offset += len;
        rec.truth_label = std::move(label);
      }
      rec.features.resize(data.dim);
      for (std::size_t d = 0; d < data.dim; ++d) rec.features[d] = detail::get_le<float>(is, offset);
      data.records.push_back(std::move(rec));
    }
    if (is.peek() != std::char_traits<char>::eof())
      throw ParseError("byte offset " + std::to_string(offset), "trailing bytes after last record");
  }
  if (data.encoding == Encoding::text && next_line(line) && !line.empty())
    throw ParseError(where(), "more records than the header declares");

  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    if (r.start_frame < 0 || r.start_frame > r.end_frame)
      throw DataError("tracklet id " + std::to_string(r.id) + ": invalid frame span");
    if (i > 0 && !record_order(data.records[i - 1], r))
      throw DataError("tracklet id " + std::to_string(r.id) +
                      ": records not sorted by (start_frame, end_frame, id)");
  }
  return data;
}

inline void write_dataset(const Dataset& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_dataset(data, os);
  if (!os) throw DataError("write to '" + path + "' failed");
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  try {
    return read_dataset(is);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace tcc
