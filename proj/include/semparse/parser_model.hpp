// Encoder-decoder policy over linearized queries.
//
// Bidirectional GRU encoder over question words, single-layer GRU decoder,
// bilinear attention over encoder states and a tanh readout before the
// output softmax. All parameters live in one flat vector so that objectives,
// optimizers and gradient checks operate on a single array.

#ifndef SEMPARSE_PARSER_MODEL_HPP
#define SEMPARSE_PARSER_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include <semparse/mrl.hpp>
#include <semparse/vocabulary.hpp>

namespace semparse {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr std::string_view source_unk = "<unk>";
inline constexpr std::string_view target_unk = "<unk>@0";

struct model_config {
  std::size_t embedding = 32;
  std::size_t hidden = 64;
  double init_scale = 0.1;
  std::uint64_t seed = 1;
};

struct tensor_block {
  std::string name;
  Index rows = 0, cols = 0, offset = 0;
  Index size() const noexcept { return rows * cols; }
};

struct gru_blocks {
  tensor_block W, U, b;  // gates stacked as [update; reset; candidate]
};

class parser_model {
 public:
  parser_model() = default;

  parser_model(vocabulary source, vocabulary target, model_config cfg)
      : src_(std::move(source)), tgt_(std::move(target)), cfg_(cfg) {
    if (src_.size() == 0 || tgt_.size() == 0) throw std::invalid_argument("empty vocabulary");
    layout();
    theta_ = VectorXd::Zero(total_);
    std::mt19937_64 rng(cfg_.seed);
    for (Index i = 0; i < total_; ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      theta_[i] = (2 * u - 1) * cfg_.init_scale;
    }
    for (const auto* b : {&enc_f_.b, &enc_b_.b, &dec_.b, &init_b_, &out_b_, &proj_b_}) theta_.segment(b->offset, b->size()).setZero();
    compute_arity_deltas();
  }

  const vocabulary& source_vocab() const noexcept { return src_; }
  const vocabulary& target_vocab() const noexcept { return tgt_; }
  const model_config& config() const noexcept { return cfg_; }

  VectorXd& parameters() noexcept { return theta_; }
  const VectorXd& parameters() const noexcept { return theta_; }
  Index num_parameters() const noexcept { return total_; }
  std::vector<tensor_block> blocks() const {
    std::vector<tensor_block> out{src_emb_, tgt_emb_};
    for (const auto* g : {&enc_f_, &enc_b_, &dec_}) out.insert(out.end(), {g->W, g->U, g->b});
    out.insert(out.end(), {init_W_, init_b_, att_W_, out_W_, out_b_, proj_W_, proj_b_});
    return out;
  }

  Index hidden() const noexcept { return static_cast<Index>(cfg_.hidden); }
  Index context() const noexcept { return 2 * hidden(); }
  Index bos() const noexcept { return static_cast<Index>(tgt_.size()); }

  // Change in open subtree slots when emitting target token v.
  long arity_delta(std::size_t v) const { return arity_delta_.at(v); }

  std::vector<std::size_t> source_ids(const std::vector<std::string>& words) const { return src_.ids(words); }
  std::vector<std::size_t> target_ids(const linear_query& y) const { return tgt_.ids(y.texts()); }

  linear_query to_query(const std::vector<std::size_t>& ids) const {
    std::vector<std::string> t;
    for (auto i : ids) t.push_back(tgt_.token(i));
    return linear_query::from_texts(t);
  }

  // ----- forward/backward ---------------------------------------------------

  struct gru_step {
    VectorXd x, h_prev, z, r, n, un, h;
  };

  struct decoder_step {
    VectorXd q, alpha, c, readout, prob;
  };

  struct encoding {
    std::vector<std::size_t> src;
    std::vector<gru_step> fwd, bwd;
    MatrixXd states;  // context x |x|
    MatrixXd att_keys;  // hidden x |x|: att_W * states
    VectorXd mean_state, init_state;
  };

  struct forward_pass {
    encoding enc;
    std::vector<std::size_t> tgt;
    std::vector<gru_step> dec;
    std::vector<decoder_step> steps;
    std::vector<double> logp;
  };

  encoding encode(const std::vector<std::size_t>& src) const {
    if (src.empty()) throw std::invalid_argument("empty question");
    encoding e;
    e.src = src;
    const Index H = hidden(), T = static_cast<Index>(src.size());
    auto E = view(src_emb_);
    e.fwd.resize(src.size());
    e.bwd.resize(src.size());
    VectorXd h = VectorXd::Zero(H);
    for (Index i = 0; i < T; ++i) {
      gru_forward(enc_f_, E.col(static_cast<Index>(src[i])), h, e.fwd[i]);
      h = e.fwd[i].h;
    }
    h.setZero();
    for (Index i = T - 1; i >= 0; --i) {
      gru_forward(enc_b_, E.col(static_cast<Index>(src[i])), h, e.bwd[i]);
      h = e.bwd[i].h;
    }
    e.states.resize(context(), T);
    for (Index i = 0; i < T; ++i) {
      e.states.col(i).head(H) = e.fwd[i].h;
      e.states.col(i).tail(H) = e.bwd[i].h;
    }
    e.att_keys = view(att_W_) * e.states;
    e.mean_state = e.states.rowwise().mean();
    e.init_state = (view(init_W_) * e.mean_state + vec(init_b_)).array().tanh().matrix();
    return e;
  }

  // One decoder step from state `s_prev` after emitting `prev` (bos() at start).
  void decode_step(const encoding& e, Index prev, const VectorXd& s_prev, gru_step& g, decoder_step& d) const {
    gru_forward(dec_, view(tgt_emb_).col(prev), s_prev, g);
    const Index H = hidden();
    VectorXd scores = e.att_keys.transpose() * g.h;
    d.q = g.h;
    const double mx = scores.maxCoeff();
    d.alpha = (scores.array() - mx).exp().matrix();
    d.alpha /= d.alpha.sum();
    d.c = e.states * d.alpha;
    VectorXd sc(H + context());
    sc << g.h, d.c;
    d.readout = (view(out_W_) * sc + vec(out_b_)).array().tanh().matrix();
    VectorXd logits = view(proj_W_) * d.readout + vec(proj_b_);
    const double lm = logits.maxCoeff();
    d.prob = (logits.array() - lm).exp().matrix();
    d.prob /= d.prob.sum();
  }

  forward_pass forward(const std::vector<std::size_t>& src, const std::vector<std::size_t>& tgt) const {
    if (tgt.empty()) throw std::invalid_argument("empty target sequence");
    forward_pass f;
    f.enc = encode(src);
    f.tgt = tgt;
    f.dec.resize(tgt.size());
    f.steps.resize(tgt.size());
    f.logp.resize(tgt.size());
    VectorXd s = f.enc.init_state;
    Index prev = bos();
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      decode_step(f.enc, prev, s, f.dec[j], f.steps[j]);
      f.logp[j] = std::log(f.steps[j].prob[static_cast<Index>(tgt[j])]);
      s = f.dec[j].h;
      prev = static_cast<Index>(tgt[j]);
    }
    return f;
  }

  // Accumulates d/dtheta of sum_j weights[j] * logp[j] into `grad`.
  void backward(const forward_pass& f, std::span<const double> weights, VectorXd& grad) const {
    if (weights.size() != f.tgt.size()) throw std::invalid_argument("one weight per target token expected");
    if (grad.size() != total_) grad = VectorXd::Zero(total_);
    const Index H = hidden(), C = context(), T = static_cast<Index>(f.enc.src.size());
    auto proj_W = view(proj_W_);
    auto out_W = view(out_W_);
    auto att_W = view(att_W_);
    auto g_proj_W = gview(grad, proj_W_);
    auto g_proj_b = gvec(grad, proj_b_);
    auto g_out_W = gview(grad, out_W_);
    auto g_out_b = gvec(grad, out_b_);
    auto g_att_W = gview(grad, att_W_);
    auto g_tgt_emb = gview(grad, tgt_emb_);

    MatrixXd d_states = MatrixXd::Zero(C, T);
    VectorXd d_s = VectorXd::Zero(H);
    for (Index j = static_cast<Index>(f.tgt.size()) - 1; j >= 0; --j) {
      const auto& st = f.steps[j];
      const auto& g = f.dec[j];
      const double w = weights[j];
      VectorXd ds = d_s;
      if (w != 0.0) {
        VectorXd d_logits = -w * st.prob;
        d_logits[static_cast<Index>(f.tgt[j])] += w;
        g_proj_W.noalias() += d_logits * st.readout.transpose();
        g_proj_b += d_logits;
        VectorXd d_read = proj_W.transpose() * d_logits;
        VectorXd d_pre = d_read.array() * (1.0 - st.readout.array().square());
        VectorXd sc(H + C);
        sc << g.h, st.c;
        g_out_W.noalias() += d_pre * sc.transpose();
        g_out_b += d_pre;
        VectorXd d_sc = out_W.transpose() * d_pre;
        ds += d_sc.head(H);
        const VectorXd d_c = d_sc.tail(C);
        // c = states * alpha
        d_states.noalias() += d_c * st.alpha.transpose();
        VectorXd d_alpha = f.enc.states.transpose() * d_c;
        VectorXd d_scores = st.alpha.array() * (d_alpha.array() - st.alpha.dot(d_alpha));
        // scores = states^T att_W^T h
        VectorXd ah = att_W.transpose() * g.h;  // context
        d_states.noalias() += ah * d_scores.transpose();
        VectorXd d_ah = f.enc.states * d_scores;
        g_att_W.noalias() += g.h * d_ah.transpose();
        ds.noalias() += att_W * d_ah;
      }
      VectorXd dx;
      gru_backward(dec_, g, ds, grad, dx, d_s);
      const Index prev = j == 0 ? bos() : static_cast<Index>(f.tgt[j - 1]);
      g_tgt_emb.col(prev) += dx;
    }

    // s0 = tanh(init_W mean + init_b)
    VectorXd d_pre0 = d_s.array() * (1.0 - f.enc.init_state.array().square());
    gview(grad, init_W_).noalias() += d_pre0 * f.enc.mean_state.transpose();
    gvec(grad, init_b_) += d_pre0;
    VectorXd d_mean = view(init_W_).transpose() * d_pre0;
    d_states.colwise() += d_mean / static_cast<double>(T);

    auto g_src_emb = gview(grad, src_emb_);
    VectorXd dh = VectorXd::Zero(H), dx;
    for (Index i = T - 1; i >= 0; --i) {
      VectorXd d = dh + d_states.col(i).head(H);
      gru_backward(enc_f_, f.enc.fwd[i], d, grad, dx, dh);
      g_src_emb.col(static_cast<Index>(f.enc.src[i])) += dx;
    }
    dh.setZero();
    for (Index i = 0; i < T; ++i) {
      VectorXd d = dh + d_states.col(i).tail(H);
      gru_backward(enc_b_, f.enc.bwd[i], d, grad, dx, dh);
      g_src_emb.col(static_cast<Index>(f.enc.src[i])) += dx;
    }
  }

  // ----- checkpoints ----------------------------------------------------------

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "semparse-checkpoint";
    j["version"] = 1;
    j["config"] = {{"embedding", cfg_.embedding}, {"hidden", cfg_.hidden}, {"init_scale", cfg_.init_scale}, {"seed", cfg_.seed}};
    j["source_vocab"] = src_.items();
    j["target_vocab"] = tgt_.items();
    auto& tensors = j["tensors"];
    for (const auto& b : blocks()) {
      std::vector<double> data(theta_.data() + b.offset, theta_.data() + b.offset + b.size());
      tensors[b.name] = {{"rows", b.rows}, {"cols", b.cols}, {"data", std::move(data)}};
    }
    return j;
  }

  static parser_model from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "semparse-checkpoint") throw std::runtime_error("not a parser checkpoint");
    if (j.value("version", 0) != 1) throw std::runtime_error("unsupported checkpoint version");
    model_config cfg;
    cfg.embedding = j.at("config").at("embedding");
    cfg.hidden = j.at("config").at("hidden");
    cfg.init_scale = j.at("config").at("init_scale");
    cfg.seed = j.at("config").at("seed");
    parser_model m(vocabulary(j.at("source_vocab").get<std::vector<std::string>>()),
                   vocabulary(j.at("target_vocab").get<std::vector<std::string>>()), cfg);
    for (const auto& b : m.blocks()) {
      const auto& t = j.at("tensors").at(b.name);
      if (t.at("rows").get<Index>() != b.rows || t.at("cols").get<Index>() != b.cols)
        throw std::runtime_error("tensor shape mismatch for " + b.name);
      const auto data = t.at("data").get<std::vector<double>>();
      for (Index i = 0; i < b.size(); ++i) m.theta_[b.offset + i] = data[static_cast<std::size_t>(i)];
    }
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json().dump();
  }

  static parser_model load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return from_json(nlohmann::json::parse(in));
  }

 private:
  using cmap = Eigen::Map<const MatrixXd>;
  using mmap = Eigen::Map<MatrixXd>;

  cmap view(const tensor_block& b) const { return cmap(theta_.data() + b.offset, b.rows, b.cols); }
  Eigen::Map<const VectorXd> vec(const tensor_block& b) const { return Eigen::Map<const VectorXd>(theta_.data() + b.offset, b.size()); }
  static mmap gview(VectorXd& g, const tensor_block& b) { return mmap(g.data() + b.offset, b.rows, b.cols); }
  static Eigen::Map<VectorXd> gvec(VectorXd& g, const tensor_block& b) { return Eigen::Map<VectorXd>(g.data() + b.offset, b.size()); }

  tensor_block add_block(std::string name, Index rows, Index cols) {
    tensor_block b{std::move(name), rows, cols, total_};
    total_ += rows * cols;
    return b;
  }

  gru_blocks add_gru(const std::string& prefix, Index input) {
    const Index H = hidden();
    return {add_block(prefix + ".W", 3 * H, input), add_block(prefix + ".U", 3 * H, H), add_block(prefix + ".b", 3 * H, 1)};
  }

  void layout() {
    const auto E = static_cast<Index>(cfg_.embedding), H = hidden(), C = context();
    const auto Vs = static_cast<Index>(src_.size()), Vt = static_cast<Index>(tgt_.size());
    total_ = 0;
    src_emb_ = add_block("source_embedding", E, Vs);
    tgt_emb_ = add_block("target_embedding", E, Vt + 1);
    enc_f_ = add_gru("encoder_forward", E);
    enc_b_ = add_gru("encoder_backward", E);
    dec_ = add_gru("decoder", E);
    init_W_ = add_block("decoder_init.W", H, C);
    init_b_ = add_block("decoder_init.b", H, 1);
    att_W_ = add_block("attention.W", H, C);
    out_W_ = add_block("readout.W", H, H + C);
    out_b_ = add_block("readout.b", H, 1);
    proj_W_ = add_block("output.W", Vt, H);
    proj_b_ = add_block("output.b", Vt, 1);
  }

  void compute_arity_deltas() {
    arity_delta_.clear();
    for (const auto& t : tgt_.items()) {
      try {
        const token tk = token::from_text(t);
        arity_delta_.push_back(tk.kind == token_kind::leaf ? -1 : static_cast<long>(tk.arity) - 1);
      } catch (const mrl_error&) {
        arity_delta_.push_back(-1);
      }
    }
  }

  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  template <typename X>
  void gru_forward(const gru_blocks& p, const X& x, const VectorXd& h_prev, gru_step& s) const {
    const Index H = hidden();
    s.x = x;
    s.h_prev = h_prev;
    VectorXd a = view(p.W) * s.x + vec(p.b);
    VectorXd u = view(p.U) * h_prev;
    s.z = (a.head(H) + u.head(H)).unaryExpr(&sigmoid);
    s.r = (a.segment(H, H) + u.segment(H, H)).unaryExpr(&sigmoid);
    s.un = u.tail(H);
    s.n = (a.tail(H).array() + s.r.array() * s.un.array()).tanh().matrix();
    s.h = ((1.0 - s.z.array()) * s.n.array() + s.z.array() * h_prev.array()).matrix();
  }

  void gru_backward(const gru_blocks& p, const gru_step& s, const VectorXd& dh_out, VectorXd& grad, VectorXd& dx,
                    VectorXd& dh_prev) const {
    const Index H = hidden();
    VectorXd dn = dh_out.array() * (1.0 - s.z.array());
    VectorXd dz = dh_out.array() * (s.h_prev.array() - s.n.array());
    dh_prev = dh_out.array() * s.z.array();
    VectorXd dan = dn.array() * (1.0 - s.n.array().square());
    VectorXd dr = dan.array() * s.un.array();
    VectorXd da(3 * H), du(3 * H);
    da.head(H) = dz.array() * s.z.array() * (1.0 - s.z.array());
    da.segment(H, H) = dr.array() * s.r.array() * (1.0 - s.r.array());
    da.tail(H) = dan;
    du.head(2 * H) = da.head(2 * H);
    du.tail(H) = dan.array() * s.r.array();
    gview(grad, p.W).noalias() += da * s.x.transpose();
    gvec(grad, p.b) += da;
    gview(grad, p.U).noalias() += du * s.h_prev.transpose();
    dx = view(p.W).transpose() * da;
    dh_prev.noalias() += view(p.U).transpose() * du;
  }

  vocabulary src_, tgt_;
  model_config cfg_;
  VectorXd theta_;
  Index total_ = 0;
  tensor_block src_emb_, tgt_emb_;
  gru_blocks enc_f_, enc_b_, dec_;
  tensor_block init_W_, init_b_, att_W_, out_W_, out_b_, proj_W_, proj_b_;
  std::vector<long> arity_delta_;
};

// Builds vocabularies from (question, query) pairs and initializes a model.
template <typename Examples>
parser_model make_parser(const Examples& examples, model_config cfg,
                         const std::vector<std::vector<std::string>>& extra_sources = {}) {
  std::vector<std::vector<std::string>> src = extra_sources, tgt;
  for (const auto& [words, query] : examples) {
    src.push_back(words);
    tgt.push_back(query.texts());
  }
  return parser_model(vocabulary::build(src, std::string(source_unk)), vocabulary::build(tgt, std::string(target_unk)), cfg);
}

// log pi(y_j | y_<j, x) for every token of y.
inline std::vector<double> token_logprobs(const parser_model& m, const std::vector<std::string>& question,
                                          const linear_query& y) {
  if (question.empty()) throw std::invalid_argument("empty question");
  if (y.empty()) throw std::invalid_argument("empty query");
  return m.forward(m.source_ids(question), m.target_ids(y)).logp;
}

inline double seq_logprob(const parser_model& m, const std::vector<std::string>& question, const linear_query& y) {
  double s = 0;
  for (double lp : token_logprobs(m, question, y)) s += lp;
  return s;
}

inline double seq_prob(const parser_model& m, const std::vector<std::string>& question, const linear_query& y) {
  return std::exp(seq_logprob(m, question, y));
}

}  // namespace semparse

#endif  // SEMPARSE_PARSER_MODEL_HPP
