#include "advrl/io/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "advrl/errors.hpp"

namespace advrl {
namespace {

void put_hex(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a\n", v);
  out += buf;
}

template <typename M>
void put_all(std::string& out, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put_hex(out, m.data()[i]);
}

void describe(std::ostringstream& os, std::string_view role, const Network& net) {
  os << "network " << role << ' ' << net.layer_count() << '\n';
  for (const auto& l : net.layers()) {
    if (const auto* d = std::get_if<DenseLayer>(&l))
      os << "layer dense " << to_string(d->activation) << ' ' << d->out_dim() << ' ' << d->in_dim() << '\n';
    else {
      const auto& n = std::get<NoisyDenseLayer>(l);
      os << "layer noisy " << to_string(n.activation) << ' ' << n.out_dim() << ' ' << n.in_dim() << '\n';
    }
  }
}

void payload(std::string& out, const Network& net) {
  for (const auto& l : net.layers()) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      put_all(out, d->weights);
      put_all(out, d->biases);
    } else {
      const auto& n = std::get<NoisyDenseLayer>(l);
      put_all(out, n.mu_weights);
      put_all(out, n.sigma_weights);
      put_all(out, n.mu_biases);
      put_all(out, n.sigma_biases);
    }
  }
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::string next(const char* what) {
    if (pos_ >= text_.size()) throw CheckpointError(std::string("checkpoint truncated: expected ") + what);
    const auto end = text_.find('\n', pos_);
    std::string line(text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_));
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    return line;
  }

  // Reads "<key> <rest>" and returns <rest>.
  std::string field(std::string_view key) {
    std::string line = next(std::string(key).c_str());
    if (line.rfind(std::string(key) + ' ', 0) != 0)
      throw CheckpointError("checkpoint: expected '" + std::string(key) + "', found '" + line + "'");
    return line.substr(key.size() + 1);
  }

  double number() {
    std::string line = next("parameter value");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (line.empty() || end != line.c_str() + line.size() || errno == ERANGE)
      throw CheckpointError("checkpoint: malformed parameter value '" + line + "'");
    return v;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::size_t to_count(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw CheckpointError(std::string("checkpoint: bad ") + what + " '" + s + "'");
  }
}

struct LayerDesc {
  bool noisy = false;
  Activation activation = Activation::identity;
  std::size_t out = 0, in = 0;
};

std::vector<LayerDesc> read_descriptor(LineReader& r, std::string_view role) {
  std::istringstream head(r.field("network"));
  std::string got_role;
  std::size_t count = 0;
  if (!(head >> got_role >> count) || got_role != role)
    throw CheckpointError("checkpoint: expected network descriptor for " + std::string(role));
  std::vector<LayerDesc> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ls(r.field("layer"));
    std::string kind, act;
    LayerDesc d;
    if (!(ls >> kind >> act >> d.out >> d.in) || (kind != "dense" && kind != "noisy"))
      throw CheckpointError("checkpoint: malformed layer descriptor");
    d.noisy = kind == "noisy";
    try {
      d.activation = activation_from_string(act);
    } catch (const InvalidInput& e) {
      throw CheckpointError(std::string("checkpoint: ") + e.what());
    }
    out.push_back(d);
  }
  return out;
}

std::size_t payload_size(const std::vector<LayerDesc>& layers) {
  std::size_t n = 0;
  for (const auto& d : layers) n += (d.noisy ? 2 : 1) * (d.out * d.in + d.out);
  return n;
}

template <typename M>
void fill(LineReader& r, M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.number();
}

Network read_network(LineReader& r, const std::vector<LayerDesc>& desc) {
  std::vector<Layer> layers;
  for (const auto& d : desc) {
    const auto out = static_cast<Eigen::Index>(d.out), in = static_cast<Eigen::Index>(d.in);
    if (d.noisy) {
      NoisyDenseLayer l;
      l.activation = d.activation;
      l.mu_weights.resize(out, in);
      l.sigma_weights.resize(out, in);
      l.mu_biases.resize(out);
      l.sigma_biases.resize(out);
      fill(r, l.mu_weights);
      fill(r, l.sigma_weights);
      fill(r, l.mu_biases);
      fill(r, l.sigma_biases);
      layers.emplace_back(std::move(l));
    } else {
      DenseLayer l;
      l.activation = d.activation;
      l.weights.resize(out, in);
      l.biases.resize(out);
      fill(r, l.weights);
      fill(r, l.biases);
      layers.emplace_back(std::move(l));
    }
  }
  try {
    return Network(std::move(layers));
  } catch (const InvalidInput& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace

Checkpoint make_checkpoint(const Agent& agent, const EnvSpec& env, std::uint64_t step) {
  return Checkpoint{env, agent.config().exploration, step, agent.online(), agent.target()};
}

std::string serialize_checkpoint(const Checkpoint& c) {
  std::ostringstream os;
  os << kCheckpointHeader << '\n';
  os << "env " << to_string(c.env.name) << '\n';
  os << "grid " << c.env.grid_height << ' ' << c.env.grid_width << '\n';
  os << "actions " << c.env.action_count << '\n';
  os << "frame_stack " << c.env.frame_stack << '\n';
  os << "paddle_length " << c.env.paddle_length << '\n';
  os << "max_episode_steps " << c.env.max_episode_steps << '\n';
  os << "exploration " << to_string(c.exploration) << '\n';
  os << "step " << c.step << '\n';
  describe(os, "online", c.online);
  describe(os, "target", c.target);
  os << "payload " << (c.online.parameter_count() + c.target.parameter_count()) << '\n';
  std::string out = os.str();
  payload(out, c.online);
  payload(out, c.target);
  out += "end\n";
  return out;
}

Checkpoint parse_checkpoint(std::string_view text) {
  LineReader r(text);
  const std::string header = r.next("header");
  if (header != kCheckpointHeader)
    throw CheckpointError("checkpoint version mismatch: expected '" + std::string(kCheckpointHeader) + "', found '" +
                          header + "'");
  Checkpoint c;
  try {
    c.env.name = env_kind_from_string(r.field("env"));
    std::istringstream grid(r.field("grid"));
    if (!(grid >> c.env.grid_height >> c.env.grid_width)) throw CheckpointError("checkpoint: bad grid line");
    c.env.action_count = to_count(r.field("actions"), "action count");
    c.env.frame_stack = to_count(r.field("frame_stack"), "frame stack");
    c.env.paddle_length = to_count(r.field("paddle_length"), "paddle length");
    c.env.max_episode_steps = to_count(r.field("max_episode_steps"), "episode limit");
    c.exploration = exploration_from_string(r.field("exploration"));
  } catch (const InvalidInput& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  c.step = to_count(r.field("step"), "step");
  const auto online = read_descriptor(r, "online");
  const auto target = read_descriptor(r, "target");
  const std::size_t declared = to_count(r.field("payload"), "payload size");
  if (declared != payload_size(online) + payload_size(target))
    throw CheckpointError("checkpoint: payload size disagrees with the architecture descriptor");
  c.online = read_network(r, online);
  c.target = read_network(r, target);
  if (r.next("end marker") != "end") throw CheckpointError("checkpoint: payload longer than its descriptor");
  if (c.online.input_dim() != c.env.observation_size() || c.online.output_dim() != c.env.action_count)
    throw CheckpointError("checkpoint: network shape does not fit its environment");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint " + tmp);
    f << text;
    if (!f.flush()) throw CheckpointError("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str());
}

void require_compatible(const Checkpoint& ckpt, const EnvSpec& env) {
  const EnvSpec& c = ckpt.env;
  if (c.name != env.name)
    throw CheckpointError("rejected checkpoint: trained on " + std::string(to_string(c.name)) + ", plan uses " +
                          std::string(to_string(env.name)));
  if (c.grid_height != env.grid_height || c.grid_width != env.grid_width || c.action_count != env.action_count ||
      c.frame_stack != env.frame_stack || (env.name == EnvKind::mini_pong && c.paddle_length != env.paddle_length))
    throw CheckpointError("rejected checkpoint: environment geometry differs from the plan");
}

}  // namespace advrl
