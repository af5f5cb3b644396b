#include "acklab/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace acklab {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("not a number: '" + std::string(s) + "'");
  return v;
}

namespace {

void check_line_safe(const std::string& what, const std::string& s) {
  if (s.find('\n') != std::string::npos) throw Error("checkpoint: newline inside " + what);
}

}  // namespace

void Checkpoint::write(std::ostream& os) const {
  os << "acklab-checkpoint " << kVersion << "\n";
  for (const auto& [k, v] : meta) {
    check_line_safe("meta key " + k, v);
    if (k.find(' ') != std::string::npos) throw Error("checkpoint: space in meta key " + k);
    os << "meta " << k << " " << v << "\n";
  }
  for (const auto& [name, items] : lists) {
    os << "list " << name << " " << items.size() << "\n";
    for (const auto& item : items) {
      check_line_safe("list " + name, item);
      os << item << "\n";
    }
  }
  for (const auto& [name, m] : tensors) {
    os << "tensor " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) os << ' ';
        os << format_double(m(r, c));
      }
      os << "\n";
    }
  }
  os << "end\n";
}

Checkpoint Checkpoint::read(std::istream& is) {
  Checkpoint ck;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError("checkpoint line " + std::to_string(lineno) + ": " + msg);
  };
  auto next = [&]() -> bool {
    if (!std::getline(is, line)) return false;
    ++lineno;
    return true;
  };
  if (!next()) throw DataError("checkpoint: empty file");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != "acklab-checkpoint") throw fail("not an acklab checkpoint");
    if (version != kVersion) throw fail("unsupported checkpoint version " + std::to_string(version));
  }
  bool ended = false;
  while (next()) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    const std::string kind = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (kind == "meta") {
      const auto sp2 = rest.find(' ');
      if (sp2 == std::string::npos) {
        ck.meta[rest] = "";
      } else {
        ck.meta[rest.substr(0, sp2)] = rest.substr(sp2 + 1);
      }
    } else if (kind == "list") {
      std::istringstream ls(rest);
      std::string name;
      std::size_t count = 0;
      if (!(ls >> name >> count)) throw fail("bad list header");
      auto& items = ck.lists[name];
      items.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        if (!next()) throw fail("truncated list " + name);
        items.push_back(line);
      }
    } else if (kind == "tensor") {
      std::istringstream ts(rest);
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      if (!(ts >> name >> rows >> cols) || rows < 0 || cols < 0) throw fail("bad tensor header");
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (!next()) throw fail("truncated tensor " + name);
        std::istringstream vs(line);
        std::string tok;
        Eigen::Index c = 0;
        while (vs >> tok) {
          if (c >= cols) throw fail("too many values in tensor " + name);
          m(r, c++) = parse_double(tok);
        }
        if (c != cols) throw fail("too few values in tensor " + name);
      }
      ck.tensors[name] = std::move(m);
    } else {
      throw fail("unknown section '" + kind + "'");
    }
  }
  if (!ended) throw DataError("checkpoint: missing end marker");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path);
  write(os);
  if (!os) throw DataError("failed writing checkpoint " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path);
  return read(is);
}

const std::string& Checkpoint::get_meta(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint: missing meta " + key);
  return it->second;
}

std::string Checkpoint::get_meta(const std::string& key, const std::string& fallback) const {
  auto it = meta.find(key);
  return it == meta.end() ? fallback : it->second;
}

const std::vector<std::string>& Checkpoint::get_list(const std::string& name) const {
  auto it = lists.find(name);
  if (it == lists.end()) throw DataError("checkpoint: missing list " + name);
  return it->second;
}

const Matrix& Checkpoint::get_tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("checkpoint: missing tensor " + name);
  return it->second;
}

void Checkpoint::put_params(const std::string& prefix, const ParameterSet& params) {
  for (const Parameter* p : params.all()) tensors[prefix + p->name] = p->value;
}

void Checkpoint::load_params(const std::string& prefix, ParameterSet& params) const {
  for (Parameter* p : params.all()) {
    const Matrix& m = get_tensor(prefix + p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw DataError("checkpoint: tensor " + prefix + p->name + " has shape " + shape_string(m) + ", expected " +
                      shape_string(p->value));
    p->value = m;
  }
}

}  // namespace acklab
