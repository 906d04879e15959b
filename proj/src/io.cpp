#include "hs/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "hs/error.hpp"

namespace hs {

namespace {

static_assert(std::endian::native == std::endian::little, "mapping files assume a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  template <class T>
  T get(const char* what) {
    if (b_.size() - pos_ < sizeof(T)) throw FormatError(std::string("truncated mapping file: ") + what);
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_mapping(const GridMapping& h) {
  const GridDomain& d = h.domain();
  Writer w;
  for (char c : {'H', 'S', 'M', 'F'}) w.put(static_cast<std::uint8_t>(c));
  w.put(kMappingFileVersion);
  w.put(static_cast<std::uint32_t>(d.nx()));
  w.put(static_cast<std::uint32_t>(d.ny()));
  w.put(d.origin().real());
  w.put(d.origin().imag());
  w.put(d.spacing());

  std::vector<std::uint32_t> runs;
  std::uint8_t state = 0;
  std::uint32_t len = 0;
  for (std::uint8_t m : d.cell_mask()) {
    const std::uint8_t v = m ? 1 : 0;
    if (v != state) {
      runs.push_back(len);
      state = v;
      len = 0;
    }
    ++len;
  }
  runs.push_back(len);
  w.put(static_cast<std::uint64_t>(runs.size()));
  for (auto r : runs) w.put(r);

  w.put(static_cast<std::uint64_t>(d.masked_node_count()));
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (d.node_masked(n)) {
      w.put(h[n].real());
      w.put(h[n].imag());
    }
  return std::move(w.out);
}

GridMapping decode_mapping(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>("magic"));
  if (std::string(magic, 4) != "HSMF") throw FormatError("not a mapping file (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kMappingFileVersion) throw FormatError("unsupported mapping file version " + std::to_string(version));
  const auto nx = r.get<std::uint32_t>("nx");
  const auto ny = r.get<std::uint32_t>("ny");
  const double ox = r.get<double>("origin"), oy = r.get<double>("origin");
  const double spacing = r.get<double>("spacing");
  if (nx < 2 || ny < 2 || nx > (1u << 16) || ny > (1u << 16)) throw FormatError("bad grid size");
  if (!(spacing > 0.0) || !std::isfinite(spacing) || !std::isfinite(ox) || !std::isfinite(oy))
    throw FormatError("bad grid geometry");

  const std::size_t cells = static_cast<std::size_t>(nx - 1) * (ny - 1);
  const auto nruns = r.get<std::uint64_t>("run count");
  if (nruns > cells + 1 || nruns * 4 > r.remaining()) throw FormatError("bad run count");
  std::vector<std::uint8_t> mask;
  mask.reserve(cells);
  std::uint8_t state = 0;
  for (std::uint64_t k = 0; k < nruns; ++k) {
    const auto len = r.get<std::uint32_t>("runs");
    if (mask.size() + len > cells) throw FormatError("mask runs exceed the cell count");
    mask.insert(mask.end(), len, state);
    state ^= 1;
  }
  if (mask.size() != cells) throw FormatError("mask runs do not cover the grid");

  GridDomain d;
  try {
    d = GridDomain(Point(ox, oy), spacing, static_cast<int>(nx), static_cast<int>(ny), std::move(mask));
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("bad grid: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>("value count");
  if (count != d.masked_node_count()) throw FormatError("value count does not match the masked node count");
  if (r.remaining() != count * 16) throw FormatError("value block has the wrong length");
  GridMapping h(d);
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (d.node_masked(n)) {
      const double u = r.get<double>("values"), v = r.get<double>("values");
      h[n] = Complex(u, v);
    }
  return h;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::random_device rd;
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename to " + path + ": " + ec.message());
  }
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

GridMapping read_mapping(const std::string& path) { return decode_mapping(read_file(path)); }

void write_mapping(const std::string& path, const GridMapping& h) { write_file_atomic(path, encode_mapping(h)); }

std::string mapping_csv(const GridMapping& h) {
  const GridDomain& d = h.domain();
  std::ostringstream os;
  os.precision(17);
  os << "i,j,x,y,u,v\n";
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (!d.node_masked(n)) continue;
    const Point p = d.node(n);
    os << d.col(n) << ',' << d.row(n) << ',' << p.real() << ',' << p.imag() << ',' << h[n].real() << ','
       << h[n].imag() << '\n';
  }
  return os.str();
}

std::string field_csv(const GridDomain& d, const std::vector<Complex>& values, const std::vector<std::uint8_t>& valid) {
  std::ostringstream os;
  os.precision(17);
  os << "i,j,x,y,re,im\n";
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (valid.empty() ? !d.node_masked(n) : !valid[n]) continue;
    const Point p = d.node(n);
    os << d.col(n) << ',' << d.row(n) << ',' << p.real() << ',' << p.imag() << ',' << values[n].real() << ','
       << values[n].imag() << '\n';
  }
  return os.str();
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace hs
