#include "sarfuse/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sarfuse/error.hpp"
#include "sarfuse/features.hpp"

namespace sarfuse::io {

namespace {

constexpr const char* kDatasetHeader = "pixel_id,parcel_id,region_id,step,doy,ndvi,sig_vv_db,sig_vh_db,coh_vv,coh_vh";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t row, const std::string& column, const std::string& what) {
  throw ValidationError(source + ": row " + std::to_string(row) + (column.empty() ? "" : ", column " + column) + ": " +
                        what);
}

double parse_double(const std::string& s, const std::string& source, std::size_t row, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) fail(source, row, column, "not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& source, std::size_t row, const std::string& column) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) fail(source, row, column, "not an integer: '" + s + "'");
  return v;
}

void check_id(const std::string& id, const char* what) {
  if (id.empty() || id.find_first_of(",\"\n\r") != std::string::npos) {
    throw ValidationError(std::string(what) + " '" + id + "' is empty or contains CSV metacharacters");
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open " + path);
  return in;
}

void expect_header(std::istream& in, const std::string& expected_prefix, const std::string& source) {
  std::string header;
  if (!std::getline(in, header)) throw ValidationError(source + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header.rfind(expected_prefix, 0) != 0) fail(source, 1, "", "expected header '" + expected_prefix + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw RuntimeError("cannot format number");
  return std::string(buf, ptr);
}

void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& writer) {
  const std::string tmp = path + ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw RuntimeError("cannot open " + tmp + " for writing");
      writer(out);
      out.flush();
      if (!out) throw RuntimeError("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  dataset.grid.validate();
  std::vector<const PixelSeries*> order;
  for (const auto& p : dataset.pixels) {
    check_id(p.pixel_id, "pixel id");
    check_id(p.parcel_id, "parcel id");
    check_id(p.region_id, "region id");
    p.validate(dataset.grid);
    order.push_back(&p);
  }
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->pixel_id < b->pixel_id; });
  out << kDatasetHeader << '\n';
  for (const auto* p : order) {
    for (int t = 0; t < dataset.grid.length; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      out << p->pixel_id << ',' << p->parcel_id << ',' << p->region_id << ',' << t << ',' << dataset.grid.doy(t) << ',';
      if (p->ndvi[ts]) out << format_double(*p->ndvi[ts]);
      out << ',' << format_double(p->channel(Channel::Sigma0VvDb)[ts]) << ','
          << format_double(p->channel(Channel::Sigma0VhDb)[ts]) << ',' << format_double(p->channel(Channel::CohVv)[ts])
          << ',' << format_double(p->channel(Channel::CohVh)[ts]) << '\n';
    }
  }
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) { write_dataset(dataset, out); });
}

Dataset read_dataset(std::istream& in, const std::string& source) {
  expect_header(in, kDatasetHeader, source);
  struct Row {
    int step;
    int doy;
    std::optional<double> ndvi;
    double vv, vh, cvv, cvh;
  };
  std::vector<PixelSeries> pixels;
  std::vector<std::vector<Row>> rows;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 10) fail(source, row_no, "", "expected 10 fields, found " + std::to_string(f.size()));
    Row r;
    r.step = parse_int(f[3], source, row_no, "step");
    r.doy = parse_int(f[4], source, row_no, "doy");
    if (!f[5].empty()) {
      r.ndvi = parse_double(f[5], source, row_no, "ndvi");
      if (!(*r.ndvi >= -1.0 && *r.ndvi <= 1.0)) fail(source, row_no, "ndvi", "value " + f[5] + " outside [-1, 1]");
    }
    r.vv = parse_double(f[6], source, row_no, "sig_vv_db");
    r.vh = parse_double(f[7], source, row_no, "sig_vh_db");
    r.cvv = parse_double(f[8], source, row_no, "coh_vv");
    r.cvh = parse_double(f[9], source, row_no, "coh_vh");
    if (!(r.cvv >= 0.0 && r.cvv <= 1.0)) fail(source, row_no, "coh_vv", "coherence " + f[8] + " outside [0, 1]");
    if (!(r.cvh >= 0.0 && r.cvh <= 1.0)) fail(source, row_no, "coh_vh", "coherence " + f[9] + " outside [0, 1]");
    if (r.step < 0) fail(source, row_no, "step", "negative step");
    auto [it, inserted] = index.try_emplace(f[0], pixels.size());
    if (inserted) {
      PixelSeries p;
      p.pixel_id = f[0];
      p.parcel_id = f[1];
      p.region_id = f[2];
      pixels.push_back(std::move(p));
      rows.emplace_back();
    } else if (pixels[it->second].parcel_id != f[1] || pixels[it->second].region_id != f[2]) {
      fail(source, row_no, "parcel_id", "pixel " + f[0] + " changes parcel or region");
    }
    rows[it->second].push_back(r);
  }
  if (pixels.empty()) throw ValidationError(source + ": no rows");

  // Recover the grid from the first pixel with two steps.
  Dataset ds;
  int max_step = 0;
  for (const auto& rs : rows) {
    for (const auto& r : rs) max_step = std::max(max_step, r.step);
  }
  ds.grid.length = max_step + 1;
  const auto& first = rows.front();
  const auto r0 = std::min_element(first.begin(), first.end(), [](const Row& a, const Row& b) { return a.step < b.step; });
  const auto r1 = std::max_element(first.begin(), first.end(), [](const Row& a, const Row& b) { return a.step < b.step; });
  if (r1->step == r0->step) throw ValidationError(source + ": cannot infer the grid from a single step");
  if ((r1->doy - r0->doy) % (r1->step - r0->step) != 0) throw ValidationError(source + ": doy is not linear in step");
  ds.grid.step_days = (r1->doy - r0->doy) / (r1->step - r0->step);
  ds.grid.start_doy = r0->doy - r0->step * ds.grid.step_days;
  ds.grid.validate();

  const auto T = static_cast<std::size_t>(ds.grid.length);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    auto& p = pixels[i];
    p.ndvi.assign(T, std::nullopt);
    for (auto& c : p.channels) c.assign(T, 0.0);
    std::vector<std::uint8_t> seen(T, 0);
    for (const auto& r : rows[i]) {
      const auto t = static_cast<std::size_t>(r.step);
      if (seen[t]) throw ValidationError(source + ": pixel " + p.pixel_id + " repeats step " + std::to_string(r.step));
      if (r.doy != ds.grid.doy(r.step)) {
        throw ValidationError(source + ": pixel " + p.pixel_id + " step " + std::to_string(r.step) + " has doy " +
                              std::to_string(r.doy) + ", grid expects " + std::to_string(ds.grid.doy(r.step)));
      }
      seen[t] = 1;
      p.ndvi[t] = r.ndvi;
      p.channel(Channel::Sigma0VvDb)[t] = r.vv;
      p.channel(Channel::Sigma0VhDb)[t] = r.vh;
      p.channel(Channel::CohVv)[t] = r.cvv;
      p.channel(Channel::CohVh)[t] = r.cvh;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
      throw ValidationError(source + ": pixel " + p.pixel_id + " is missing grid steps");
    }
    features::derive_in_place(p);
  }
  ds.pixels = std::move(pixels);
  ds.validate();
  return ds;
}

Dataset read_dataset(const std::string& path) {
  auto in = open_in(path);
  return read_dataset(in, path);
}

void write_labels(const std::vector<ParcelLabel>& labels, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "parcel_id,event_doy\n";
    for (const auto& l : labels) {
      check_id(l.parcel_id, "parcel id");
      if (l.event_doys.empty()) out << l.parcel_id << ",\n";
      for (int d : l.event_doys) out << l.parcel_id << ',' << d << '\n';
    }
  });
}

std::vector<ParcelLabel> read_labels(const std::string& path) {
  auto in = open_in(path);
  expect_header(in, "parcel_id,event_doy", path);
  std::vector<ParcelLabel> labels;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 2) fail(path, row, "", "expected 2 fields");
    auto [it, inserted] = index.try_emplace(f[0], labels.size());
    if (inserted) labels.push_back({f[0], {}});
    if (!f[1].empty()) labels[it->second].event_doys.push_back(parse_int(f[1], path, row, "event_doy"));
  }
  for (auto& l : labels) std::sort(l.event_doys.begin(), l.event_doys.end());
  return labels;
}

void write_masks(const std::vector<cloudsim::MaskPool>& pools, const std::string& path) {
  if (pools.empty()) throw ValidationError("no mask pools to write");
  const std::size_t T = pools.front().masks.empty() ? 0 : pools.front().masks.front().size();
  for (const auto& p : pools) {
    check_id(p.region_id, "region id");
    p.validate(T);
  }
  atomic_write(path, [&](std::ostream& out) {
    out << "mask_id,region_id";
    for (std::size_t t = 0; t < T; ++t) out << ",bit_" << t;
    out << '\n';
    for (const auto& p : pools) {
      for (std::size_t m = 0; m < p.masks.size(); ++m) {
        out << p.region_id << '_' << m << ',' << p.region_id;
        for (auto b : p.masks[m].bits) out << ',' << static_cast<int>(b != 0);
        out << '\n';
      }
    }
  });
}

std::vector<cloudsim::MaskPool> read_masks(const std::string& path) {
  auto in = open_in(path);
  expect_header(in, "mask_id,region_id,bit_0", path);
  std::vector<cloudsim::MaskPool> pools;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t row = 1;
  std::size_t T = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() < 3) fail(path, row, "", "too few fields");
    if (T == 0) T = f.size() - 2;
    if (f.size() - 2 != T) fail(path, row, "", "mask length differs from earlier rows");
    CloudMask m;
    for (std::size_t t = 0; t < T; ++t) {
      const auto& cell = f[t + 2];
      if (cell != "0" && cell != "1") fail(path, row, "bit_" + std::to_string(t), "expected 0 or 1");
      m.bits.push_back(cell == "1" ? 1 : 0);
    }
    auto [it, inserted] = index.try_emplace(f[1], pools.size());
    if (inserted) pools.push_back({f[1], {}});
    pools[it->second].masks.push_back(std::move(m));
  }
  if (pools.empty()) throw ValidationError(path + ": no masks");
  return pools;
}

void write_events(const EventTable& events, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "parcel_id,event_doy,score\n";
    for (const auto& [parcel, set] : events) {
      check_id(parcel, "parcel id");
      if (set.doys.empty()) out << parcel << ",,\n";
      for (std::size_t i = 0; i < set.doys.size(); ++i) {
        out << parcel << ',' << set.doys[i] << ',' << format_double(set.scores[i]) << '\n';
      }
    }
  });
}

EventTable read_events(const std::string& path) {
  auto in = open_in(path);
  expect_header(in, "parcel_id,event_doy,score", path);
  EventTable table;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 3) fail(path, row, "", "expected 3 fields");
    auto& set = table[f[0]];
    if (f[1].empty()) continue;
    set.doys.push_back(parse_int(f[1], path, row, "event_doy"));
    set.scores.push_back(f[2].empty() ? 1.0 : parse_double(f[2], path, row, "score"));
  }
  return table;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw RuntimeError("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 15];
  }
  return hex;
}

std::string file_sha256(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace sarfuse::io
