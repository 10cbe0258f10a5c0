#include "brpuf/crp.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace brpuf {

// ---- LFSR ----------------------------------------------------------------

GaloisLfsr::GaloisLfsr(unsigned width, std::uint64_t taps, std::uint64_t state)
    : width_(width), taps_(taps), state_(state) {
  if (width < 4 || width > 64) throw InvalidParameter("LFSR width must lie in [4, 64]");
  const std::uint64_t mask = width == 64 ? ~0ull : ((1ull << width) - 1);
  if ((taps & ~mask) != 0) throw InvalidParameter("LFSR taps exceed the register width");
  if ((state & ~mask) != 0) throw InvalidParameter("LFSR state exceeds the register width");
  if (state == 0) throw InvalidParameter("LFSR state must be nonzero");
}

std::vector<Challenge> lfsr_generate(GaloisLfsr& lfsr, std::size_t count, std::size_t m) {
  if (count == 0) throw InvalidParameter("challenge count must be >= 1");
  if (m == 0) throw InvalidParameter("challenge width must be >= 1");
  if (lfsr.width() < 8) throw InvalidParameter("challenge generation needs an LFSR of width >= 8");

  // The bit stream has period at most 2^w - 1, so the challenge sequence
  // repeats after at most that many challenges.
  const std::uint64_t max_attempts =
      lfsr.width() >= 40 ? std::numeric_limits<std::uint64_t>::max() : (1ull << lfsr.width()) - 1;

  std::vector<Challenge> out;
  out.reserve(count);
  std::unordered_set<Challenge, ChallengeHash> seen;
  std::uint64_t attempts = 0;
  while (out.size() < count) {
    if (attempts++ >= max_attempts)
      throw GenerationError("LFSR stream exhausted after " + std::to_string(out.size()) + " distinct challenges");
    Challenge c(m);
    for (std::size_t i = 0; i < m; ++i) c.set(i, lfsr.step() != 0);
    if (seen.insert(c).second) out.push_back(std::move(c));
  }
  return out;
}

// ---- dataset -------------------------------------------------------------

void CrpDataset::add(CrpRecord record) {
  if (record.challenge.size() != meta_.m)
    throw DimensionError("challenge width " + std::to_string(record.challenge.size()) + " differs from m=" +
                         std::to_string(meta_.m));
  if (record.response > 1) throw InvalidParameter("response must be 0 or 1");
  if (!seen_.insert(record.challenge).second) throw InvalidParameter("duplicate challenge in dataset");
  records_.push_back(std::move(record));
}

std::vector<std::uint8_t> CrpDataset::responses() const {
  std::vector<std::uint8_t> r;
  r.reserve(size());
  for (const auto& rec : records_) r.push_back(rec.response);
  return r;
}

std::vector<Challenge> CrpDataset::challenges() const {
  std::vector<Challenge> c;
  c.reserve(size());
  for (const auto& rec : records_) c.push_back(rec.challenge);
  return c;
}

// ---- collection ----------------------------------------------------------

std::vector<std::vector<EvalOutcome>> evaluate_repeated(const XorPuf& puf, const Obfuscation& obf,
                                                        std::span<const Challenge> challenges,
                                                        unsigned iterations, const NoiseModel& noise,
                                                        double theta) {
  if (iterations == 0) throw InvalidParameter("iterations must be >= 1");
  std::vector<std::vector<EvalOutcome>> out;
  out.reserve(challenges.size());
  for (std::size_t i = 0; i < challenges.size(); ++i) {
    const Challenge final_challenge = brpuf::apply(obf, challenges[i]);
    NoiseStream stream(noise, i);
    std::vector<EvalOutcome> evals;
    evals.reserve(iterations);
    for (unsigned r = 0; r < iterations; ++r) evals.push_back(evaluate(puf, final_challenge, theta, stream));
    out.push_back(std::move(evals));
  }
  return out;
}

CrpDataset collect_crps(const XorPuf& puf, const Obfuscation& obf, std::span<const Challenge> challenges,
                        const CollectOptions& opts) {
  if (opts.iterations % 2 == 0) throw InvalidParameter("iterations must be odd for a majority vote");

  CrpMeta meta;
  meta.puf_kind = puf.kind_label();
  meta.m = puf.stages_count();
  meta.k = puf.k();
  meta.chip_seed = opts.chip_seed;
  meta.obfuscation = obfuscation_label(obf);
  meta.lfsr_taps = opts.lfsr_taps;
  meta.lfsr_seed = opts.lfsr_seed;
  meta.iterations = opts.iterations;
  meta.theta = opts.theta;
  meta.sigma = opts.noise.sigma;
  CrpDataset ds(meta);

  const auto evals = evaluate_repeated(puf, obf, challenges, opts.iterations, opts.noise, opts.theta);
  for (std::size_t i = 0; i < challenges.size(); ++i) {
    unsigned ones = 0;
    bool converged = true;
    for (const auto& e : evals[i]) {
      if (!e.is_converged()) {
        converged = false;
        break;
      }
      ones += static_cast<unsigned>(e.bit());
    }
    if (!converged) continue;
    ds.add({challenges[i], static_cast<std::uint8_t>(2 * ones > opts.iterations ? 1 : 0)});
  }
  return ds;
}

// ---- CSV -----------------------------------------------------------------

namespace {

constexpr int kSchemaVersion = 1;

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

template <typename T>
T parse_number(const std::string& text, std::size_t line, const std::string& key) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  int base = 10;
  if constexpr (std::is_integral_v<T>) {
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
      first += 2;
      base = 16;
    }
    auto [p, ec] = std::from_chars(first, last, value, base);
    if (ec != std::errc{} || p != last) throw ParseError(line, "bad value for " + key + ": '" + text + "'");
  } else {
    auto [p, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || p != last) throw ParseError(line, "bad value for " + key + ": '" + text + "'");
  }
  return value;
}

}  // namespace

void write_dataset(const CrpDataset& ds, std::ostream& out) {
  const auto& m = ds.meta();
  out << "# schema_version=" << kSchemaVersion << '\n'
      << "# puf_kind=" << m.puf_kind << '\n'
      << "# m=" << m.m << '\n'
      << "# k=" << m.k << '\n'
      << "# chip_seed=" << m.chip_seed << '\n'
      << "# obfuscation=" << m.obfuscation << '\n'
      << "# lfsr_taps=" << hex64(m.lfsr_taps) << '\n'
      << "# lfsr_seed=" << hex64(m.lfsr_seed) << '\n'
      << "# iterations=" << m.iterations << '\n'
      << "# theta=" << format_double(m.theta) << '\n'
      << "# sigma=" << format_double(m.sigma) << '\n';
  for (const auto& r : ds.records()) out << r.challenge.to_string() << ',' << int(r.response) << '\n';
}

void write_dataset(const CrpDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_dataset(ds, out);
  if (!out) throw Error("write to " + path.string() + " failed");
}

CrpDataset read_dataset(std::istream& in) {
  std::map<std::string, std::pair<std::string, std::size_t>> header;
  std::string line;
  std::size_t lineno = 0;
  CrpDataset ds;
  bool header_done = false;

  const auto finish_header = [&](std::size_t at) {
    static const char* required[] = {"schema_version", "puf_kind", "m",        "k",          "chip_seed", "obfuscation",
                                     "lfsr_taps",      "lfsr_seed", "iterations", "theta",    "sigma"};
    for (const char* key : required)
      if (!header.count(key)) throw ParseError(at, std::string("missing header key ") + key);
    const auto get = [&](const char* key) -> const std::string& { return header.at(key).first; };
    const auto at_line = [&](const char* key) { return header.at(key).second; };
    if (parse_number<int>(get("schema_version"), at_line("schema_version"), "schema_version") != kSchemaVersion)
      throw ParseError(at_line("schema_version"), "unsupported schema_version");
    CrpMeta meta;
    meta.puf_kind = get("puf_kind");
    meta.m = parse_number<std::size_t>(get("m"), at_line("m"), "m");
    if (meta.m == 0) throw ParseError(at_line("m"), "m must be positive");
    meta.k = parse_number<std::size_t>(get("k"), at_line("k"), "k");
    meta.chip_seed = parse_number<std::uint64_t>(get("chip_seed"), at_line("chip_seed"), "chip_seed");
    meta.obfuscation = get("obfuscation");
    meta.lfsr_taps = parse_number<std::uint64_t>(get("lfsr_taps"), at_line("lfsr_taps"), "lfsr_taps");
    meta.lfsr_seed = parse_number<std::uint64_t>(get("lfsr_seed"), at_line("lfsr_seed"), "lfsr_seed");
    meta.iterations = parse_number<unsigned>(get("iterations"), at_line("iterations"), "iterations");
    meta.theta = parse_number<double>(get("theta"), at_line("theta"), "theta");
    meta.sigma = parse_number<double>(get("sigma"), at_line("sigma"), "sigma");
    ds = CrpDataset(meta);
    header_done = true;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') throw ParseError(lineno, "CRLF line ending");
    if (!line.empty() && line[0] == '#') {
      if (header_done) throw ParseError(lineno, "header line after records");
      const auto body = line.substr(line.find_first_not_of("# ") == std::string::npos
                                        ? line.size()
                                        : line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (eq == std::string::npos || eq == 0) throw ParseError(lineno, "malformed header line");
      const auto key = body.substr(0, eq);
      if (header.count(key)) throw ParseError(lineno, "duplicate header key " + key);
      header[key] = {body.substr(eq + 1), lineno};
      continue;
    }
    if (line.empty()) continue;
    if (!header_done) finish_header(lineno);

    const auto comma = line.find(',');
    if (comma == std::string::npos || comma + 2 != line.size())
      throw ParseError(lineno, "expected '<bits>,<0|1>'");
    const std::string bits = line.substr(0, comma);
    if (bits.size() != ds.meta().m)
      throw ParseError(lineno, "challenge has " + std::to_string(bits.size()) + " bits, header says m=" +
                                   std::to_string(ds.meta().m));
    if (bits.find_first_not_of("01") != std::string::npos) throw ParseError(lineno, "non-binary challenge");
    const char resp = line[comma + 1];
    if (resp != '0' && resp != '1') throw ParseError(lineno, std::string("non-binary response '") + resp + "'");
    try {
      ds.add({Challenge::from_string(bits), static_cast<std::uint8_t>(resp - '0')});
    } catch (const InvalidParameter& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (!header_done) finish_header(lineno + 1);
  return ds;
}

CrpDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_dataset(in);
}

// ---- binary --------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'R', 'P', 'D'};
constexpr std::uint8_t kBinaryVersion = 1;

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::ostream& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw InvalidParameter("header string too long");
  put_le(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get_le(std::istream& in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int ch = in.get();
    if (ch == EOF) throw ParseError(0, "truncated binary dataset");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return static_cast<T>(v);
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

std::string get_str(std::istream& in) {
  const auto n = get_le<std::uint16_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != n) throw ParseError(0, "truncated binary dataset");
  return s;
}

}  // namespace

void write_dataset_binary(const CrpDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const auto& m = ds.meta();
  out.write(kMagic, 4);
  out.put(static_cast<char>(kBinaryVersion));
  put_le(out, static_cast<std::uint32_t>(m.m));
  put_le(out, static_cast<std::uint32_t>(m.k));
  put_le(out, static_cast<std::uint64_t>(ds.size()));
  put_le(out, m.chip_seed);
  put_le(out, m.lfsr_taps);
  put_le(out, m.lfsr_seed);
  put_le(out, static_cast<std::uint32_t>(m.iterations));
  put_f64(out, m.theta);
  put_f64(out, m.sigma);
  put_str(out, m.puf_kind);
  put_str(out, m.obfuscation);

  const std::size_t row_bytes = (m.m + 7) / 8;
  std::vector<char> row(row_bytes);
  for (const auto& r : ds.records()) {
    std::fill(row.begin(), row.end(), 0);
    for (std::size_t i = 0; i < m.m; ++i)
      if (r.challenge[i]) row[i / 8] = static_cast<char>(row[i / 8] | (1 << (i % 8)));
    out.write(row.data(), static_cast<std::streamsize>(row_bytes));
  }
  std::vector<char> resp((ds.size() + 7) / 8, 0);
  for (std::size_t r = 0; r < ds.size(); ++r)
    if (ds.records()[r].response) resp[r / 8] = static_cast<char>(resp[r / 8] | (1 << (r % 8)));
  out.write(resp.data(), static_cast<std::streamsize>(resp.size()));
  if (!out) throw Error("write to " + path.string() + " failed");
}

CrpDataset read_dataset_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) throw ParseError(0, "bad magic, not a CRPD file");
  if (in.get() != kBinaryVersion) throw ParseError(0, "unsupported CRPD version");
  CrpMeta meta;
  meta.m = get_le<std::uint32_t>(in);
  meta.k = get_le<std::uint32_t>(in);
  const auto n = get_le<std::uint64_t>(in);
  meta.chip_seed = get_le<std::uint64_t>(in);
  meta.lfsr_taps = get_le<std::uint64_t>(in);
  meta.lfsr_seed = get_le<std::uint64_t>(in);
  meta.iterations = get_le<std::uint32_t>(in);
  meta.theta = get_f64(in);
  meta.sigma = get_f64(in);
  meta.puf_kind = get_str(in);
  meta.obfuscation = get_str(in);
  if (meta.m == 0) throw ParseError(0, "m must be positive");

  const std::size_t row_bytes = (meta.m + 7) / 8;
  std::vector<Challenge> challenges;
  challenges.reserve(n);
  std::vector<char> row(row_bytes);
  for (std::uint64_t r = 0; r < n; ++r) {
    in.read(row.data(), static_cast<std::streamsize>(row_bytes));
    if (static_cast<std::size_t>(in.gcount()) != row_bytes) throw ParseError(0, "truncated binary dataset");
    Challenge c(meta.m);
    for (std::size_t i = 0; i < meta.m; ++i) c.set(i, (row[i / 8] >> (i % 8)) & 1);
    challenges.push_back(std::move(c));
  }
  std::vector<char> resp((n + 7) / 8);
  in.read(resp.data(), static_cast<std::streamsize>(resp.size()));
  if (static_cast<std::size_t>(in.gcount()) != resp.size()) throw ParseError(0, "truncated binary dataset");

  CrpDataset ds(meta);
  for (std::uint64_t r = 0; r < n; ++r)
    ds.add({std::move(challenges[r]), static_cast<std::uint8_t>((resp[r / 8] >> (r % 8)) & 1)});
  return ds;
}

// ---- split ---------------------------------------------------------------

std::pair<CrpDataset, CrpDataset> split_dataset(const CrpDataset& ds, std::size_t train_size,
                                                std::size_t test_size, std::uint64_t seed) {
  if (train_size + test_size > ds.size())
    throw SizeError("requested " + std::to_string(train_size) + " train + " + std::to_string(test_size) +
                    " test records but dataset has " + std::to_string(ds.size()));
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, "split"));
  std::shuffle(idx.begin(), idx.end(), rng);

  CrpDataset train(ds.meta()), test(ds.meta());
  for (std::size_t i = 0; i < train_size; ++i) train.add(ds.records()[idx[i]]);
  for (std::size_t i = 0; i < test_size; ++i) test.add(ds.records()[idx[train_size + i]]);
  return {std::move(train), std::move(test)};
}

}  // namespace brpuf
