#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kdiff/mat.hpp"

namespace kdiff {

/// Sizes and switches of the noise-prediction network. use_attention /
/// use_rope exist for the ablation harness and default to the full
/// model.
struct DenoiserConfig {
    std::size_t model_dim = 256;
    std::size_t n_blocks = 4;
    std::size_t n_heads = 4;
    std::size_t latent_dim = 70; // fixed by the latent layout
    std::size_t audio_dim = 16;
    std::size_t max_seq = 66;
    std::size_t ffn_mult = 4;
    bool use_attention = true;
    bool use_rope = true;

    void validate() const;
    std::size_t head_dim() const { return model_dim / n_heads; }
};

/// Named parameter tensor with its gradient accumulator. `id` is the
/// tensor's index in the model's parameter list.
struct Tensor {
    std::string name;
    Mat v;
    Mat g;
    std::size_t id = 0;

    Tensor(std::string n, std::size_t rows, std::size_t cols)
        : name(std::move(n)), v(rows, cols), g(rows, cols) {}
};

/// Detached gradient storage aligned with the model's parameter list;
/// lets independent backward passes run concurrently and be reduced in
/// a fixed order afterwards.
struct GradBuffer {
    std::vector<Mat> grads;
    void zero() {
        for (Mat& g : grads) g.fill(0.0);
    }
};

/// Raw sinusoidal encoding of a timestep: sin half then cos half.
Mat sinusoidal_timestep_embedding(int t, std::size_t dim);

/// Applies rotary position rotations to each row of `vectors` (even
/// column count) at the standard geometric frequency spectrum.
Mat rope_rotate(const Mat& vectors, const std::vector<double>& positions);

/// Positions used for the structured input: reference rows count down
/// to -1 just before the motion rows at 0..n-1.
std::vector<double> structured_positions(std::size_t ref_rows, std::size_t motion_rows);

/// Activations retained by a training-mode forward pass.
struct ForwardCache {
    Mat input;
    Mat audio;
    int t = 0;
    std::size_t ref_rows = 2;
    std::vector<double> positions;

    Mat sin_emb, time_h, time_act, time_emb;
    Mat audio_emb;           // per-row audio embedding incl. null-token rows
    Mat fuse_in, fuse_pre, cond;
    Mat x0;                  // input projection output

    struct BlockCache {
        Mat x_in;
        std::vector<double> ln1_mean, ln1_rstd;
        Mat n1, scale, shift, film;
        Mat ffn_h, ffn_act, x_mid;
        std::vector<double> ln2_mean, ln2_rstd;
        Mat n2, q, k, v, q_rot, k_rot;
        std::vector<Mat> probs; // per head, S x S
        Mat attn_cat;
    };
    std::vector<BlockCache> blocks;
    Mat x_last;
};

/// The spatiotemporal attention denoiser: per-row input projection,
/// FiLM-conditioned residual feed-forward blocks and RoPE
/// self-attention across all rows, projected back to latent width.
class DenoiserModel {
public:
    explicit DenoiserModel(const DenoiserConfig& cfg);
    DenoiserModel(const DenoiserModel&) = delete;
    DenoiserModel& operator=(const DenoiserModel&) = delete;
    ~DenoiserModel();

    const DenoiserConfig& config() const { return cfg_; }

    /// Random init, fan-in scaled; the output projection starts at zero
    /// unless zero_output_proj is cleared (gradient checks want it
    /// random).
    void init_params(std::uint64_t seed, bool zero_output_proj = true);

    std::vector<Tensor*>& params() { return params_; }
    const std::vector<Tensor*>& params() const { return params_; }
    std::size_t param_count() const;
    void zero_grads();

    /// Sinusoid passed through the Time MLP.
    Mat time_embedding(int t) const;

    /// One condition vector per structured-input row; reference rows
    /// use the learned null audio token instead of audio content.
    Mat fuse_condition(const Mat& time_emb, const Mat& audio, std::size_t ref_rows) const;

    /// Forward pass, inference flavor.
    Mat denoise(const Mat& input, const Mat& audio, int t, std::size_t ref_rows = 2) const;

    /// Forward pass retaining activations for backward().
    Mat forward(const Mat& input, const Mat& audio, int t, std::size_t ref_rows,
                ForwardCache& cache) const;

    /// Accumulates parameter gradients for d(loss)/d(output) = d_out
    /// into the tensors' own .g fields, or into `buffer` when given
    /// (thread-safe for concurrent calls with distinct buffers).
    void backward(const ForwardCache& cache, const Mat& d_out, GradBuffer* buffer = nullptr);

    GradBuffer make_grad_buffer() const;
    /// g += buffer, element-wise, in parameter order.
    void accumulate_grads(const GradBuffer& buffer);

private:
    struct Impl;
    DenoiserConfig cfg_;
    Impl* impl_;
    std::vector<Tensor*> params_;
};

/// Free-function form of the forward pass.
Mat denoise(const Mat& structured_input, const Mat& audio, int t, const DenoiserModel& model,
            std::size_t ref_rows = 2);

} // namespace kdiff
