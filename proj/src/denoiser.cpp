#include "kdiff/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "kdiff/kernels.hpp"
#include "kdiff/rng.hpp"

namespace kdiff {

namespace {

namespace kn = kernels;

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

/// Resolves where a tensor's gradient goes: its own .g field, or a
/// detached buffer keyed by tensor id.
struct GradSink {
    std::vector<Mat>* storage = nullptr;
    Mat& of(Tensor& t) const { return storage ? (*storage)[t.id] : t.g; }
};

/// y = x*W + b with gradient accumulation on backward.
struct Linear {
    Tensor w, b;

    Linear(const std::string& prefix, std::size_t in, std::size_t out)
        : w(prefix + ".w", in, out), b(prefix + ".b", 1, out) {}

    Mat forward(const Mat& x) const {
        Mat y;
        kn::matmul(x, w.v, y);
        kn::add_row_vector(y, b.v);
        return y;
    }

    Mat backward(const Mat& x, const Mat& d_y, const GradSink& sink) {
        kn::matmul_tn_acc(x, d_y, sink.of(w));
        kn::col_sum_acc(d_y, sink.of(b));
        Mat d_x;
        kn::matmul_nt(d_y, w.v, d_x);
        return d_x;
    }
};

struct LayerNorm {
    Tensor gain, bias;

    LayerNorm(const std::string& prefix, std::size_t dim)
        : gain(prefix + ".gain", 1, dim), bias(prefix + ".bias", 1, dim) {}

    Mat forward(const Mat& x, std::vector<double>& mean, std::vector<double>& rstd) const {
        Mat out;
        kn::layernorm_rows(x, gain.v, bias.v, out, mean, rstd);
        return out;
    }

    Mat backward(const Mat& x, const std::vector<double>& mean, const std::vector<double>& rstd,
                 const Mat& d_out, const GradSink& sink) {
        Mat d_x;
        kn::layernorm_rows_backward(x, gain.v, mean, rstd, d_out, d_x, sink.of(gain),
                                    sink.of(bias));
        return d_x;
    }
};

struct Block {
    LayerNorm norm1;
    Linear cond_affine; // cond -> [scale | shift]
    Linear ffn1, ffn2;
    LayerNorm norm2;
    Linear wq, wk, wv, wo;

    Block(const std::string& prefix, const DenoiserConfig& cfg)
        : norm1(prefix + ".norm1", cfg.model_dim),
          cond_affine(prefix + ".cond_affine", cfg.model_dim, 2 * cfg.model_dim),
          ffn1(prefix + ".ffn1", cfg.model_dim, cfg.ffn_mult * cfg.model_dim),
          ffn2(prefix + ".ffn2", cfg.ffn_mult * cfg.model_dim, cfg.model_dim),
          norm2(prefix + ".norm2", cfg.model_dim),
          wq(prefix + ".attn.q", cfg.model_dim, cfg.model_dim),
          wk(prefix + ".attn.k", cfg.model_dim, cfg.model_dim),
          wv(prefix + ".attn.v", cfg.model_dim, cfg.model_dim),
          wo(prefix + ".attn.out", cfg.model_dim, cfg.model_dim) {}
};

} // namespace

void DenoiserConfig::validate() const {
    require(model_dim > 0 && n_blocks > 0 && n_heads > 0 && audio_dim > 0 && ffn_mult > 0,
            "DenoiserConfig: sizes must be positive");
    require(latent_dim == 70, "DenoiserConfig: latent_dim is fixed at 70");
    require(max_seq >= 66, "DenoiserConfig: max_seq must be >= 66");
    require(model_dim % (2 * n_heads) == 0,
            "DenoiserConfig: model_dim must be divisible by 2*n_heads");
}

Mat sinusoidal_timestep_embedding(int t, std::size_t dim) {
    require(t >= 0, "sinusoidal_timestep_embedding: t must be >= 0");
    require(dim > 0 && dim % 2 == 0, "sinusoidal_timestep_embedding: dim must be even");
    const std::size_t half = dim / 2;
    Mat emb(1, dim);
    for (std::size_t i = 0; i < half; ++i) {
        const double freq =
            std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
        emb(0, i) = std::sin(t * freq);
        emb(0, half + i) = std::cos(t * freq);
    }
    return emb;
}

Mat rope_rotate(const Mat& vectors, const std::vector<double>& positions) {
    Mat out;
    kn::rope_rows(vectors, positions, out);
    return out;
}

std::vector<double> structured_positions(std::size_t ref_rows, std::size_t motion_rows) {
    std::vector<double> pos(ref_rows + motion_rows);
    for (std::size_t r = 0; r < ref_rows; ++r)
        pos[r] = -static_cast<double>(ref_rows - r);
    for (std::size_t i = 0; i < motion_rows; ++i)
        pos[ref_rows + i] = static_cast<double>(i);
    return pos;
}

struct DenoiserModel::Impl {
    Linear input_proj;
    Linear time_mlp1, time_mlp2;
    Linear audio_proj;
    Tensor null_audio;
    Linear fuse;
    std::vector<Block> blocks;
    Linear output_proj;

    explicit Impl(const DenoiserConfig& cfg)
        : input_proj("input_proj", cfg.latent_dim, cfg.model_dim),
          time_mlp1("time_mlp1", cfg.model_dim, cfg.model_dim),
          time_mlp2("time_mlp2", cfg.model_dim, cfg.model_dim),
          audio_proj("audio_proj", cfg.audio_dim, cfg.model_dim),
          null_audio("null_audio", 1, cfg.model_dim),
          fuse("fuse", 2 * cfg.model_dim, cfg.model_dim),
          output_proj("output_proj", cfg.model_dim, cfg.latent_dim) {
        blocks.reserve(cfg.n_blocks);
        for (std::size_t b = 0; b < cfg.n_blocks; ++b)
            blocks.emplace_back("block" + std::to_string(b), cfg);
    }
};

DenoiserModel::DenoiserModel(const DenoiserConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    impl_ = new Impl(cfg_);

    auto reg_linear = [this](Linear& l) {
        params_.push_back(&l.w);
        params_.push_back(&l.b);
    };
    auto reg_norm = [this](LayerNorm& n) {
        params_.push_back(&n.gain);
        params_.push_back(&n.bias);
    };
    reg_linear(impl_->input_proj);
    reg_linear(impl_->time_mlp1);
    reg_linear(impl_->time_mlp2);
    reg_linear(impl_->audio_proj);
    params_.push_back(&impl_->null_audio);
    reg_linear(impl_->fuse);
    for (Block& b : impl_->blocks) {
        reg_norm(b.norm1);
        reg_linear(b.cond_affine);
        reg_linear(b.ffn1);
        reg_linear(b.ffn2);
        reg_norm(b.norm2);
        reg_linear(b.wq);
        reg_linear(b.wk);
        reg_linear(b.wv);
        reg_linear(b.wo);
    }
    reg_linear(impl_->output_proj);
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i]->id = i;

    init_params(0);
}

DenoiserModel::~DenoiserModel() { delete impl_; }

void DenoiserModel::init_params(std::uint64_t seed, bool zero_output_proj) {
    Rng rng(mix_seed(seed, 0x6d6f64656cULL));
    for (Tensor* t : params_) {
        const bool is_norm_gain = t->name.ends_with(".gain");
        const bool is_bias = t->name.ends_with(".bias") || t->name.ends_with(".b");
        if (is_norm_gain) {
            t->v.fill(1.0);
        } else if (is_bias) {
            t->v.fill(0.0);
        } else if (t->name == "null_audio") {
            for (std::size_t i = 0; i < t->v.size(); ++i) t->v.data()[i] = 0.02 * rng.normal();
        } else {
            const double std = 1.0 / std::sqrt(static_cast<double>(t->v.rows()));
            for (std::size_t i = 0; i < t->v.size(); ++i) t->v.data()[i] = std * rng.normal();
        }
        t->g.fill(0.0);
    }
    if (zero_output_proj) {
        impl_->output_proj.w.v.fill(0.0);
        impl_->output_proj.b.v.fill(0.0);
    }
}

std::size_t DenoiserModel::param_count() const {
    std::size_t n = 0;
    for (const Tensor* t : params_) n += t->v.size();
    return n;
}

void DenoiserModel::zero_grads() {
    for (Tensor* t : params_) t->g.fill(0.0);
}

Mat DenoiserModel::time_embedding(int t) const {
    const Mat sin_emb = sinusoidal_timestep_embedding(t, cfg_.model_dim);
    const Mat h = impl_->time_mlp1.forward(sin_emb);
    Mat act;
    kn::silu(h, act);
    return impl_->time_mlp2.forward(act);
}

Mat DenoiserModel::fuse_condition(const Mat& time_emb, const Mat& audio,
                                  std::size_t ref_rows) const {
    require(time_emb.rows() == 1 && time_emb.cols() == cfg_.model_dim,
            "fuse_condition: bad time embedding shape");
    require(audio.cols() == cfg_.audio_dim, "fuse_condition: audio width must match audio_dim");

    const std::size_t rows = ref_rows + audio.rows();
    const Mat audio_proj = impl_->audio_proj.forward(audio);
    Mat fuse_in(rows, 2 * cfg_.model_dim);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cfg_.model_dim; ++c) fuse_in(r, c) = time_emb(0, c);
        const double* src =
            r < ref_rows ? impl_->null_audio.v.row(0) : audio_proj.row(r - ref_rows);
        for (std::size_t c = 0; c < cfg_.model_dim; ++c) fuse_in(r, cfg_.model_dim + c) = src[c];
    }
    const Mat pre = impl_->fuse.forward(fuse_in);
    Mat cond;
    kn::silu(pre, cond);
    return cond;
}

Mat DenoiserModel::forward(const Mat& input, const Mat& audio, int t, std::size_t ref_rows,
                           ForwardCache& cache) const {
    require(input.cols() == cfg_.latent_dim, "denoise: input rows must be 70 wide");
    require(ref_rows >= 1 && ref_rows <= 2, "denoise: ref_rows must be 1 or 2");
    require(input.rows() == ref_rows + audio.rows(),
            "denoise: input must hold ref rows plus one row per audio frame");
    require(input.rows() <= cfg_.max_seq, "denoise: sequence longer than max_seq");
    require(audio.cols() == cfg_.audio_dim, "denoise: audio width must match audio_dim");
    require(t >= 0, "denoise: t must be >= 0");

    const std::size_t d = cfg_.model_dim;
    cache = ForwardCache{};
    cache.input = input;
    cache.audio = audio;
    cache.t = t;
    cache.ref_rows = ref_rows;
    cache.positions = structured_positions(ref_rows, audio.rows());

    // Conditioning: Time MLP output broadcast to every row, fused with
    // the per-row audio embedding (null token on reference rows).
    cache.sin_emb = sinusoidal_timestep_embedding(t, d);
    cache.time_h = impl_->time_mlp1.forward(cache.sin_emb);
    kn::silu(cache.time_h, cache.time_act);
    cache.time_emb = impl_->time_mlp2.forward(cache.time_act);

    const std::size_t rows = input.rows();
    const Mat audio_proj = impl_->audio_proj.forward(audio);
    cache.audio_emb = Mat(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src =
            r < ref_rows ? impl_->null_audio.v.row(0) : audio_proj.row(r - ref_rows);
        for (std::size_t c = 0; c < d; ++c) cache.audio_emb(r, c) = src[c];
    }
    cache.fuse_in = Mat(rows, 2 * d);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) cache.fuse_in(r, c) = cache.time_emb(0, c);
        for (std::size_t c = 0; c < d; ++c) cache.fuse_in(r, d + c) = cache.audio_emb(r, c);
    }
    cache.fuse_pre = impl_->fuse.forward(cache.fuse_in);
    kn::silu(cache.fuse_pre, cache.cond);

    cache.x0 = impl_->input_proj.forward(input);

    Mat x = cache.x0;
    cache.blocks.resize(cfg_.n_blocks);
    for (std::size_t bi = 0; bi < cfg_.n_blocks; ++bi) {
        Block& blk = impl_->blocks[bi];
        ForwardCache::BlockCache& bc = cache.blocks[bi];
        bc.x_in = x;

        // FiLM-conditioned residual feed-forward.
        bc.n1 = blk.norm1.forward(x, bc.ln1_mean, bc.ln1_rstd);
        const Mat cs = blk.cond_affine.forward(cache.cond);
        bc.scale = cs.slice_cols(0, d);
        bc.shift = cs.slice_cols(d, 2 * d);
        bc.film = Mat(rows, d);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c)
                bc.film(r, c) = bc.n1(r, c) * (1.0 + bc.scale(r, c)) + bc.shift(r, c);
        bc.ffn_h = blk.ffn1.forward(bc.film);
        kn::silu(bc.ffn_h, bc.ffn_act);
        const Mat ffn_out = blk.ffn2.forward(bc.ffn_act);
        bc.x_mid = Mat(rows, d);
        for (std::size_t i = 0; i < bc.x_mid.size(); ++i)
            bc.x_mid.data()[i] = bc.x_in.data()[i] + ffn_out.data()[i];

        if (!cfg_.use_attention) {
            x = bc.x_mid;
            continue;
        }

        // RoPE self-attention over all rows.
        bc.n2 = blk.norm2.forward(bc.x_mid, bc.ln2_mean, bc.ln2_rstd);
        bc.q = blk.wq.forward(bc.n2);
        bc.k = blk.wk.forward(bc.n2);
        bc.v = blk.wv.forward(bc.n2);
        if (cfg_.use_rope) {
            bc.q_rot = Mat(rows, d);
            bc.k_rot = Mat(rows, d);
            for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
                const std::size_t c0 = h * cfg_.head_dim(), c1 = c0 + cfg_.head_dim();
                Mat qh, kh;
                kn::rope_rows(bc.q.slice_cols(c0, c1), cache.positions, qh);
                kn::rope_rows(bc.k.slice_cols(c0, c1), cache.positions, kh);
                bc.q_rot.set_cols(c0, qh);
                bc.k_rot.set_cols(c0, kh);
            }
        } else {
            bc.q_rot = bc.q;
            bc.k_rot = bc.k;
        }

        const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg_.head_dim()));
        bc.probs.resize(cfg_.n_heads);
        bc.attn_cat = Mat(rows, d);
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
            const std::size_t c0 = h * cfg_.head_dim(), c1 = c0 + cfg_.head_dim();
            const Mat qh = bc.q_rot.slice_cols(c0, c1);
            const Mat kh = bc.k_rot.slice_cols(c0, c1);
            Mat scores;
            kn::matmul_nt(qh, kh, scores);
            for (std::size_t i = 0; i < scores.size(); ++i) scores.data()[i] *= inv_sqrt_dh;
            kn::softmax_rows(scores);
            bc.probs[h] = scores;
            Mat oh;
            kn::matmul(scores, bc.v.slice_cols(c0, c1), oh);
            bc.attn_cat.set_cols(c0, oh);
        }
        const Mat attn_out = blk.wo.forward(bc.attn_cat);
        x = Mat(rows, d);
        for (std::size_t i = 0; i < x.size(); ++i)
            x.data()[i] = bc.x_mid.data()[i] + attn_out.data()[i];
    }
    cache.x_last = x;
    return impl_->output_proj.forward(x);
}

Mat DenoiserModel::denoise(const Mat& input, const Mat& audio, int t, std::size_t ref_rows) const {
    ForwardCache cache;
    return forward(input, audio, t, ref_rows, cache);
}

void DenoiserModel::backward(const ForwardCache& cache, const Mat& d_out, GradBuffer* buffer) {
    const std::size_t d = cfg_.model_dim;
    const std::size_t rows = cache.input.rows();
    require(d_out.rows() == rows && d_out.cols() == cfg_.latent_dim,
            "backward: gradient shape must match the output");
    if (buffer != nullptr)
        require(buffer->grads.size() == params_.size(), "backward: buffer/model mismatch");
    const GradSink sink{buffer != nullptr ? &buffer->grads : nullptr};

    Mat d_x = impl_->output_proj.backward(cache.x_last, d_out, sink);
    Mat d_cond(rows, d);

    for (std::size_t bi = cfg_.n_blocks; bi-- > 0;) {
        Block& blk = impl_->blocks[bi];
        const ForwardCache::BlockCache& bc = cache.blocks[bi];
        Mat d_x_mid = d_x; // residual branch

        if (cfg_.use_attention) {
            const Mat d_attn_cat = blk.wo.backward(bc.attn_cat, d_x, sink);
            Mat d_q_rot(rows, d), d_k_rot(rows, d), d_v(rows, d);
            const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg_.head_dim()));
            for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
                const std::size_t c0 = h * cfg_.head_dim(), c1 = c0 + cfg_.head_dim();
                const Mat d_oh = d_attn_cat.slice_cols(c0, c1);
                const Mat vh = cache.blocks[bi].v.slice_cols(c0, c1);
                const Mat& probs = bc.probs[h];

                Mat d_probs;
                kn::matmul_nt(d_oh, vh, d_probs);
                Mat d_vh(vh.rows(), vh.cols());
                kn::matmul_tn_acc(probs, d_oh, d_vh);

                // softmax backward per row
                Mat d_scores(rows, rows);
                for (std::size_t r = 0; r < rows; ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < rows; ++c) dot += d_probs(r, c) * probs(r, c);
                    for (std::size_t c = 0; c < rows; ++c)
                        d_scores(r, c) = probs(r, c) * (d_probs(r, c) - dot) * inv_sqrt_dh;
                }

                const Mat qh = bc.q_rot.slice_cols(c0, c1);
                const Mat kh = bc.k_rot.slice_cols(c0, c1);
                Mat d_qh;
                kn::matmul(d_scores, kh, d_qh);
                Mat d_kh(kh.rows(), kh.cols());
                kn::matmul_tn_acc(d_scores, qh, d_kh);

                d_q_rot.set_cols(c0, d_qh);
                d_k_rot.set_cols(c0, d_kh);
                d_v.set_cols(c0, d_vh);
            }

            Mat d_q(rows, d), d_k(rows, d);
            if (cfg_.use_rope) {
                for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
                    const std::size_t c0 = h * cfg_.head_dim(), c1 = c0 + cfg_.head_dim();
                    Mat dq, dk;
                    kn::rope_rows_inverse(d_q_rot.slice_cols(c0, c1), cache.positions, dq);
                    kn::rope_rows_inverse(d_k_rot.slice_cols(c0, c1), cache.positions, dk);
                    d_q.set_cols(c0, dq);
                    d_k.set_cols(c0, dk);
                }
            } else {
                d_q = d_q_rot;
                d_k = d_k_rot;
            }

            Mat d_n2 = blk.wq.backward(bc.n2, d_q, sink);
            {
                const Mat t1 = blk.wk.backward(bc.n2, d_k, sink);
                const Mat t2 = blk.wv.backward(bc.n2, d_v, sink);
                for (std::size_t i = 0; i < d_n2.size(); ++i)
                    d_n2.data()[i] += t1.data()[i] + t2.data()[i];
            }
            const Mat d_from_ln2 =
                blk.norm2.backward(bc.x_mid, bc.ln2_mean, bc.ln2_rstd, d_n2, sink);
            for (std::size_t i = 0; i < d_x_mid.size(); ++i)
                d_x_mid.data()[i] += d_from_ln2.data()[i];
        }

        // Feed-forward branch.
        Mat d_x_in = d_x_mid; // residual
        const Mat d_ffn_act = blk.ffn2.backward(bc.ffn_act, d_x_mid, sink);
        Mat d_ffn_h;
        kn::silu_backward(bc.ffn_h, d_ffn_act, d_ffn_h);
        const Mat d_film = blk.ffn1.backward(bc.film, d_ffn_h, sink);

        Mat d_n1(rows, d);
        Mat d_cs(rows, 2 * d);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                d_n1(r, c) = d_film(r, c) * (1.0 + bc.scale(r, c));
                d_cs(r, c) = d_film(r, c) * bc.n1(r, c); // d scale
                d_cs(r, d + c) = d_film(r, c);           // d shift
            }
        }
        {
            const Mat d_cond_blk = blk.cond_affine.backward(cache.cond, d_cs, sink);
            for (std::size_t i = 0; i < d_cond.size(); ++i)
                d_cond.data()[i] += d_cond_blk.data()[i];
        }
        const Mat d_from_ln1 =
            blk.norm1.backward(bc.x_in, bc.ln1_mean, bc.ln1_rstd, d_n1, sink);
        for (std::size_t i = 0; i < d_x_in.size(); ++i) d_x_in.data()[i] += d_from_ln1.data()[i];

        d_x = d_x_in;
    }

    impl_->input_proj.backward(cache.input, d_x, sink);

    // Conditioning path.
    Mat d_fuse_pre;
    kn::silu_backward(cache.fuse_pre, d_cond, d_fuse_pre);
    const Mat d_fuse_in = impl_->fuse.backward(cache.fuse_in, d_fuse_pre, sink);

    Mat d_time_emb(1, d);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < d; ++c) d_time_emb(0, c) += d_fuse_in(r, c);

    Mat d_audio_proj(cache.audio.rows(), d);
    for (std::size_t r = 0; r < rows; ++r) {
        if (r < cache.ref_rows) {
            for (std::size_t c = 0; c < d; ++c)
                sink.of(impl_->null_audio)(0, c) += d_fuse_in(r, d + c);
        } else {
            for (std::size_t c = 0; c < d; ++c)
                d_audio_proj(r - cache.ref_rows, c) = d_fuse_in(r, d + c);
        }
    }
    impl_->audio_proj.backward(cache.audio, d_audio_proj, sink);

    const Mat d_time_act = impl_->time_mlp2.backward(cache.time_act, d_time_emb, sink);
    Mat d_time_h;
    kn::silu_backward(cache.time_h, d_time_act, d_time_h);
    impl_->time_mlp1.backward(cache.sin_emb, d_time_h, sink);
}

GradBuffer DenoiserModel::make_grad_buffer() const {
    GradBuffer buffer;
    buffer.grads.reserve(params_.size());
    for (const Tensor* t : params_) buffer.grads.emplace_back(t->v.rows(), t->v.cols());
    return buffer;
}

void DenoiserModel::accumulate_grads(const GradBuffer& buffer) {
    require(buffer.grads.size() == params_.size(), "accumulate_grads: buffer/model mismatch");
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Mat& g = params_[p]->g;
        const Mat& src = buffer.grads[p];
        for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += src.data()[i];
    }
}

Mat denoise(const Mat& structured_input, const Mat& audio, int t, const DenoiserModel& model,
            std::size_t ref_rows) {
    return model.denoise(structured_input, audio, t, ref_rows);
}

} // namespace kdiff
