#include "cli.hpp"

#include <sys/stat.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "neuracodec/attacks.hpp"
#include "neuracodec/dataset.hpp"
#include "neuracodec/image_io.hpp"
#include "neuracodec/probe.hpp"

namespace fs = std::filesystem;

namespace neuracodec::cli {

namespace {

constexpr const char* kKeyEnv = "NEURACODEC_KEY";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

MasterKey resolve_key(const std::string& key_file) {
  if (!key_file.empty()) return MasterKey::load(key_file);
  if (const char* env = std::getenv(kKeyEnv); env != nullptr && *env != '\0') return MasterKey::parse(env);
  throw UsageError(std::string("a key is required: pass --key FILE or set ") + kKeyEnv);
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text << "\n";
    return;
  }
  std::ofstream f(out_path, std::ios::trunc);
  f << text << "\n";
  if (!f) throw DataError("cannot write " + out_path);
}

void write_key_file(const fs::path& path, const MasterKey& key, bool force) {
  if (fs::exists(path) && !force) throw DataError(path.string() + " already exists (use --force to overwrite)");
  {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write key file " + path.string());
    f << key.hex() << "\n";
    if (!f) throw DataError("cannot write key file " + path.string());
  }
  ::chmod(path.c_str(), S_IRUSR | S_IWUSR);
}

struct EncryptArgs {
  std::string key_file;
  std::string scheme = "neuracrypt";
  std::string in_dir;
  std::string out_dir;
  std::size_t patch = 16;
  std::size_t depth = 4;
  std::size_t hidden = 768;
  std::size_t output_dim = 0;
  bool no_patch_shuffle = false;
  bool png = false;
  unsigned jobs = 1;
  bool keep_perm = false;
  bool nondeterministic_shuffle = false;
};

int do_encrypt(const EncryptArgs& a, std::ostream& out) {
  const MasterKey key = resolve_key(a.key_file);
  const auto files = list_images(a.in_dir);
  if (files.empty()) throw DataError("no loadable images (.png/.ppm) in " + a.in_dir);
  const ImageTensor first = load_image(files.front());

  EncoderConfig config = EncoderConfig::defaults(parse_scheme(a.scheme));
  config.channels = first.channels();
  config.height = first.height();
  config.width = first.width();
  config.patch_size = a.patch;
  config.depth = a.depth;
  config.hidden_width = a.hidden;
  if (config.scheme == Scheme::color) {
    if (a.output_dim != 0 && a.output_dim != config.patch_dim())
      throw ConfigError("--output-dim must equal C*p*p = " + std::to_string(config.patch_dim()) + " for the color scheme");
    config.output_dim = config.patch_dim();
    if (a.no_patch_shuffle) config.patch_shuffle = false;
  } else {
    if (a.output_dim != 0) config.output_dim = a.output_dim;
    config.patch_shuffle = !a.no_patch_shuffle;
  }
  config.validate();

  DatasetOptions options;
  options.jobs = a.jobs;
  options.export_png = a.png;
  options.encrypt.keep_permutation = a.keep_perm;
  options.encrypt.nondeterministic_shuffle = a.nondeterministic_shuffle;
  encrypt_dataset(a.in_dir, key, config, a.out_dir, options);
  out << (fs::path(a.out_dir) / kManifestName).string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"neuracodec: keyed random-network image encryption and evaluation"};
  app.name("neuracodec");
  app.require_subcommand(1);
  app.set_version_flag("--version", "neuracodec 0.1.0");

  // keygen
  std::string keygen_out;
  bool keygen_force = false;
  auto* keygen = app.add_subcommand("keygen", "Write a fresh 256-bit key as 64 hex characters (mode 0600)");
  keygen->add_option("--out", keygen_out, "Key file to create")->required();
  keygen->add_flag("--force", keygen_force, "Overwrite an existing key file");

  // encrypt
  EncryptArgs enc;
  auto* encrypt = app.add_subcommand("encrypt", "Encrypt every image in a directory and write manifest.json");
  encrypt->add_option("--key", enc.key_file, "Key file (falls back to $NEURACODEC_KEY, a 64-hex-char key)");
  encrypt->add_option("--scheme", enc.scheme, "Encoder scheme")->check(CLI::IsMember({"neuracrypt", "color"}))->capture_default_str();
  encrypt->add_option("--in", enc.in_dir, "Directory of 8-bit PNG / binary PPM images")->required();
  encrypt->add_option("--out", enc.out_dir, "Output directory")->required();
  encrypt->add_option("--patch", enc.patch, "Patch size p (must divide height and width)")->capture_default_str();
  encrypt->add_option("--depth", enc.depth, "Number of 1x1-conv blocks")->capture_default_str();
  encrypt->add_option("--hidden", enc.hidden, "Hidden width")->capture_default_str();
  encrypt->add_option("--output-dim", enc.output_dim, "Token width (neuracrypt; color forces C*p*p)");
  encrypt->add_flag("--no-patch-shuffle", enc.no_patch_shuffle, "Disable per-image patch shuffling (neuracrypt)");
  encrypt->add_flag("--png", enc.png, "Also write visualisation PNGs (color scheme only)");
  encrypt->add_option("--jobs", enc.jobs, "Worker threads; output is identical for any value")->check(CLI::PositiveNumber)->capture_default_str();
  encrypt->add_flag("--keep-perm", enc.keep_perm, "Record applied patch permutations in the manifest");
  encrypt->add_flag("--nondeterministic-shuffle", enc.nondeterministic_shuffle,
                    "Draw patch permutations from OS entropy instead of the key");

  // verify
  std::string verify_key, verify_enc;
  auto* verify = app.add_subcommand("verify", "Check that a key matches an encrypted dataset's fingerprint");
  verify->add_option("--key", verify_key, "Key file (falls back to $NEURACODEC_KEY)");
  verify->add_option("--enc", verify_enc, "Encrypted dataset directory")->required();

  // attack / leakage
  std::string plain_dir, enc_dir, report_out;
  auto* attack = app.add_subcommand("attack", "Collision matching attack between plain and encrypted sets (JSON)");
  attack->add_option("--plain", plain_dir, "Plain image directory")->required();
  attack->add_option("--enc", enc_dir, "Encrypted dataset directory (with manifest.json)")->required();
  attack->add_option("--out", report_out, "Write the JSON report here instead of stdout");
  auto* leakage = app.add_subcommand("leakage", "Leakage metrics for an encrypted dataset (JSON)");
  leakage->add_option("--plain", plain_dir, "Plain image directory")->required();
  leakage->add_option("--enc", enc_dir, "Encrypted dataset directory (with manifest.json)")->required();
  leakage->add_option("--out", report_out, "Write the JSON report here instead of stdout");

  // probe
  std::string probe_key;
  UtilitySettings ps;
  auto* probe = app.add_subcommand("probe", "Linear-probe utility experiment on a keyed toy dataset (JSON)");
  probe->add_option("--key", probe_key, "Key file (falls back to $NEURACODEC_KEY)");
  probe->add_option("--classes", ps.classes, "Number of classes")->check(CLI::Range(2, 64))->capture_default_str();
  probe->add_option("--train-per-class", ps.train_per_class, "Training images per class")->check(CLI::PositiveNumber)->capture_default_str();
  probe->add_option("--test-per-class", ps.test_per_class, "Test images per class")->check(CLI::PositiveNumber)->capture_default_str();
  probe->add_option("--size", ps.height, "Image height and width")->capture_default_str();
  probe->add_option("--patch", ps.patch_size, "Patch size")->capture_default_str();
  probe->add_option("--depth", ps.depth, "Number of 1x1-conv blocks")->capture_default_str();
  probe->add_option("--hidden", ps.hidden_width, "Hidden width")->capture_default_str();
  probe->add_option("--noise", ps.noise_sigma, "Pixel noise standard deviation")->capture_default_str();
  probe->add_option("--epochs", ps.train.epochs, "Full-batch gradient steps")->capture_default_str();
  probe->add_option("--lr", ps.train.learning_rate, "Learning rate")->capture_default_str();
  probe->add_option("--reps", ps.repetitions, "Keyed repetitions (median reported)")->capture_default_str();
  probe->add_option("--jobs", ps.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  probe->add_option("--out", report_out, "Write the JSON report here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*keygen) {
      write_key_file(keygen_out, MasterKey::random(), keygen_force);
      out << keygen_out << "\n";
    } else if (*encrypt) {
      return do_encrypt(enc, out);
    } else if (*verify) {
      const MasterKey key = resolve_key(verify_key);
      const auto manifest = read_manifest(verify_enc);
      const bool ok = manifest.matches(key);
      nlohmann::json j{{"match", ok}, {"expected", manifest.key_fingerprint}, {"actual", key.fingerprint()}};
      out << j.dump(2) << "\n";
      if (!ok) {
        err << "error: key fingerprint does not match the manifest\n";
        return kDataError;
      }
    } else if (*attack) {
      emit(to_json(match_plain_encrypted(plain_dir, enc_dir)), report_out, out);
    } else if (*leakage) {
      emit(to_json(leakage_report(plain_dir, enc_dir)), report_out, out);
    } else if (*probe) {
      const MasterKey key = resolve_key(probe_key);
      ps.width = ps.height;
      emit(to_json(utility_experiment(key, ps)), report_out, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace neuracodec::cli
