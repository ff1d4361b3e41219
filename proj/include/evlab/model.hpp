#pragma once

#include "evlab/config.hpp"
#include "evlab/events.hpp"
#include "evlab/image.hpp"
#include "evlab/nn.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace evlab {

struct ModelConfig {
    int image_channels = 3;
    int voxel_bins = 5;
    int codec_hidden = 12;
    int latent_channels = 4;
    int encoder_hidden_full = 8;  // EvEncoder channels at full resolution
    int encoder_hidden_half = 16; // and at half resolution
    int denoiser_hidden = 16;
    int schedule_steps = 1000;
    std::string schedule_name = "linear_alpha_bar";
    double t_star_alpha_sq = 0.81; // picks t* on the schedule
    std::uint64_t init_seed = 0x9e11ab;

    KvConfig to_config() const;
    static ModelConfig from_config(const KvConfig& cfg);
    void validate() const;
};

// Variance-preserving coefficient table: alpha_t^2 + beta_t^2 = 1 for every
// t, alpha non-increasing, alpha[t_star] > 0.
class DiffusionSchedule {
public:
    DiffusionSchedule() = default;
    DiffusionSchedule(std::vector<double> alphas, std::vector<double> betas, int t_star);

    // alpha-bar declines linearly from 1 over `steps` indices; t_star is the
    // index whose alpha^2 is closest to target_alpha_sq
    static DiffusionSchedule linear_alpha_bar(int steps, double target_alpha_sq);

    void validate() const;

    int steps() const { return static_cast<int>(alphas_.size()); }
    int t_star() const { return t_star_; }
    double alpha(int t) const { return alphas_.at(t); }
    double beta(int t) const { return betas_.at(t); }

private:
    std::vector<double> alphas_, betas_;
    int t_star_ = 0;
};

struct EtfState {
    Tensor hidden;
};

// Gated temporal fusion: y = g (.) x + (1 - g) (.) h_prev with
// g = sigmoid(conv_g([conv_x(x) || conv_h(h_prev)])); the new hidden state
// is y itself.
struct EtfModule {
    Conv2dLayer conv_x, conv_h, conv_g;
    int channels = 0;

    EtfModule() = default;
    EtfModule(int ch, const std::string& name, std::uint64_t seed);

    EtfState initial_state(int h, int w) const;
    std::pair<Tensor, EtfState> forward(const Tensor& x, const EtfState& state) const;

    void collect(ParamList& out, const std::string& prefix) const;
};

// free-function form matching the rest of the op surface
std::pair<Tensor, EtfState> etf_forward(const Tensor& x, const EtfState& state,
                                        const EtfModule& params);

// Small VAE-style codec: encoder emits (mean, logvar) at latent_channels x
// H/2 x W/2; decoder mirrors back to a sigmoid image.
struct LatentCodec {
    Conv2dLayer enc1, enc2, enc3;
    Conv2dLayer dec1, dec2, dec3;
    int image_channels = 3, hidden = 12, latent_channels = 4;

    LatentCodec() = default;
    LatentCodec(const ModelConfig& cfg, const std::string& name, std::uint64_t seed);

    std::pair<Tensor, Tensor> encode(const Tensor& x) const; // (mean, logvar)
    Tensor decode(const Tensor& z) const;

    void collect(ParamList& out, const std::string& prefix) const;
    void collect_encoder(ParamList& out, const std::string& prefix) const;
    void collect_decoder(ParamList& out, const std::string& prefix) const;
    void copy_values_from(const LatentCodec& other);
};

// Recurrent event encoder: voxel stem -> ETF at full resolution ->
// downsample -> ETF at half resolution -> (mean, logvar) latent head.
struct EvEncoder {
    Conv2dLayer stem, mid, head;
    EtfModule etf1, etf2;
    int voxel_bins = 5, latent_channels = 4;

    struct State {
        EtfState s1, s2;
    };

    EvEncoder() = default;
    EvEncoder(const ModelConfig& cfg, const std::string& name, std::uint64_t seed);

    State initial_state(int h, int w) const;
    // returns (mean, logvar) and the advanced state
    std::pair<std::pair<Tensor, Tensor>, State> step(const Tensor& voxel,
                                                     const State& state) const;

    std::vector<std::pair<Tensor, Tensor>> encode_sequence(
        const std::vector<VoxelGrid>& voxels) const;

    void collect(ParamList& out, const std::string& prefix) const;
};

// 4 residual blocks around one 2x down/up pair, sinusoidal timestep
// embedding added after the input conv.
struct Denoiser {
    Conv2dLayer conv_in, conv_out;
    Conv2dLayer ra1, ra2, rb1, rb2, rc1, rc2, rd1, rd2;
    LinearLayer t_proj;
    int hidden = 16, latent_channels = 4;

    Denoiser() = default;
    Denoiser(const ModelConfig& cfg, const std::string& name, std::uint64_t seed);

    Tensor forward(const Tensor& z, int t_index, int schedule_steps) const;

    void collect(ParamList& out, const std::string& prefix) const;
};

// eps_fn(z, t) -> predicted noise
using EpsFn = std::function<Tensor(const Tensor&, int)>;

// z_hat = (z - beta_t* eps(z; t*)) / alpha_t*
Tensor os_diff(const Tensor& z, const DiffusionSchedule& schedule, const EpsFn& eps);
Tensor os_diff(const Tensor& z, const DiffusionSchedule& schedule, const EpsFn& eps, int t_index);

// full inference bundle
struct EvDiffModel {
    ModelConfig cfg;
    LatentCodec codec;
    EvEncoder encoder;
    Denoiser denoiser;
    DiffusionSchedule schedule;

    explicit EvDiffModel(const ModelConfig& cfg_);

    // windows -> voxels -> recurrent encode (mean latents) -> one-step
    // diffusion -> decode; deterministic, one denoiser evaluation per frame
    std::vector<Image> reconstruct(const EventStream& stream, std::uint64_t window_dt) const;

    ParamList inference_params(); // encoder + denoiser + codec
};

// sinusoidal timestep embedding (dim even), values constant per (t, dim)
Tensor timestep_embedding(int t, int dim, int max_steps);

} // namespace evlab
