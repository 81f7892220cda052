use std::fs;
use std::path::Path;

use pixforge::features::{self, HarrisParams, MoravecParams};
use pixforge::filter::{self, BorderMode, Kernel};
use pixforge::geometry::{self, AffineMap, Axis, InterpMode, Transform};
use pixforge::image::{self, load_pnm, save_pnm, Image};
use pixforge::imageopt::{self, DreamParams, LayerSelection, StyleParams};
use pixforge::nn::{self, save_weights, synthetic, Dataset, Layer, Network, TrainConfig};
use pixforge::spectral;

use crate::{io_failure, Arch, Border, Command, CornerArgs, Detector, Failure, Interp, ReflectAxis, TrainArgs, WarpArgs};

type Outcome = Result<(), Failure>;

fn read_image(path: &Path) -> Result<Image, Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    load_pnm(&bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn write_image(path: &Path, img: &Image) -> Outcome {
    write(path, save_pnm(img, false))
}

/// Writes to `path`, or prints when there is none.
fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn losses_csv(losses: &[f64]) -> String {
    let mut s = String::from("step,loss\n");
    for (i, l) in losses.iter().enumerate() {
        s.push_str(&format!("{i},{l}\n"));
    }
    s
}

fn read_model(path: &Path) -> Result<Network, Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    Network::from_weights(&bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Converts color to gray when the network was trained on one channel.
fn fit_channels(net: &Network, img: Image) -> Image {
    match net.layers.first() {
        Some(Layer::Conv { filters, .. }) if filters.shape()[1] == 1 && !img.is_gray() => img.to_gray(),
        _ => img,
    }
}

fn selection(net: &Network, layers: Vec<usize>) -> Result<LayerSelection, Failure> {
    if layers.is_empty() {
        Ok(LayerSelection::default_for(net))
    } else {
        Ok(LayerSelection::new(net, layers)?)
    }
}

pub(crate) fn run(command: Command) -> Outcome {
    match command {
        Command::Hist { input, channel, out } => {
            let img = read_image(&input)?;
            emit(out.as_deref(), &image::histogram(&img, channel)?.to_csv())
        }
        Command::Equalize { input, out } => write_image(&out, &image::equalize(&read_image(&input)?)),
        Command::Pointop { input, gain, bias, out } => write_image(&out, &image::point_op(&read_image(&input)?, gain, bias)?),
        Command::Warp(args) => warp(args),
        Command::Filter { input, mask, border, out } => {
            let kernel = parse_mask(&mask)?;
            let border = match border {
                Border::Clamp => BorderMode::ClampToEdge,
                Border::Zero => BorderMode::ZeroPad,
            };
            let img = read_image(&input)?;
            let result = img.map_planes(|p| Ok(filter::convolve(p, &kernel, border)))?;
            write_image(&out, &result)
        }
        Command::Edges { input, threshold, out } => {
            write_image(&out, &filter::edge_magnitude(&read_image(&input)?, threshold)?)
        }
        Command::Fft { input, out_spectrum, spectrum_image, lowpass, out_filtered } => {
            let plane = read_image(&input)?.to_real();
            let spectrum = spectral::padded_spectrum(&plane);
            write(&out_spectrum, spectrum.to_csv())?;
            if let Some(p) = spectrum_image {
                write_image(&p, &spectral::spectrum_image(&spectrum))?;
            }
            if let (Some(frac), Some(p)) = (lowpass, out_filtered) {
                write_image(&p, &spectral::lowpass_plane(&plane, frac)?.to_image())?;
            }
            Ok(())
        }
        Command::Corners(args) => corners(args),
        Command::Train(args) => train(args),
        Command::Classify { model, classes, images } => {
            let net = read_model(&model)?;
            for path in images {
                let probs = net.predict(&fit_channels(&net, read_image(&path)?))?;
                let parts: Vec<String> = probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let name = classes.get(i).cloned().unwrap_or_else(|| i.to_string());
                        format!("{name} {:.2}%", 100.0 * p)
                    })
                    .collect();
                println!("{}: {}", path.display(), parts.join(", "));
            }
            Ok(())
        }
        Command::Attack { model, eps, label, input, out, losses } => {
            let net = read_model(&model)?;
            let img = fit_channels(&net, read_image(&input)?);
            let label = match label {
                Some(l) => l,
                None => nn::argmax(&net.predict(&img)?),
            };
            let adv = imageopt::fgsm_attack(&net, &img, label, eps)?;
            write_image(&out, &adv)?;
            if let Some(p) = losses {
                let before = classification_loss(&net, &img, label)?;
                let after = classification_loss(&net, &adv, label)?;
                write(&p, losses_csv(&[before, after]))?;
            }
            Ok(())
        }
        Command::Dream { model, layers, steps, octaves, octave_scale, lr, input, out, losses } => {
            let net = read_model(&model)?;
            let sel = selection(&net, layers)?;
            let img = fit_channels(&net, read_image(&input)?);
            let params = DreamParams { steps, lr, octaves, octave_scale };
            let dream = imageopt::deep_dream(&net, &img, &sel, &params)?;
            write_image(&out, &dream.image)?;
            if let Some(p) = losses {
                write(&p, losses_csv(&dream.losses))?;
            }
            Ok(())
        }
        Command::Style { model, content, style, layers, sw, cw, steps, lr, out, losses } => {
            let net = read_model(&model)?;
            let sel = selection(&net, layers)?;
            let content = fit_channels(&net, read_image(&content)?);
            let style = fit_channels(&net, read_image(&style)?);
            let params = StyleParams { content_weight: cw, style_weight: sw, steps, lr };
            let result = imageopt::style_transfer(&net, &content, &style, &sel, &params)?;
            write_image(&out, &result.image)?;
            if let Some(p) = losses {
                write(&p, losses_csv(&result.losses))?;
            }
            Ok(())
        }
        Command::GenDataset { out, n, size, seed } => {
            if size < 4 {
                return Err(Failure::Usage(format!("image size must be at least 4, got {size}")));
            }
            for name in synthetic::SHAPE_CLASSES {
                fs::create_dir_all(out.join(name)).map_err(|e| io_failure(&out, e))?;
            }
            for (i, (img, label)) in synthetic::shapes(n, size, seed).iter().enumerate() {
                write_image(&out.join(synthetic::SHAPE_CLASSES[*label]).join(format!("{i:05}.pgm")), img)?;
            }
            Ok(())
        }
    }
}

fn classification_loss(net: &Network, img: &Image, label: usize) -> Result<f64, Failure> {
    let tape = pixforge::autograd::Tape::new();
    let t = pixforge::autograd::Tensor::from_image(img);
    let mut shape = vec![1];
    shape.extend_from_slice(t.shape());
    let x = tape.constant(shape, t.data().to_vec())?;
    Ok(net.loss(&tape, x, &[label])?.0.item())
}

fn parse_mask(spec: &str) -> Result<Kernel, Failure> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Failure::Usage(format!("mask must be mean:N, gaussian:SIGMA or file:PATH, got {spec:?}")))?;
    let bad = |what: &str| Failure::Usage(format!("invalid {what} in mask {spec:?}"));
    match kind {
        "mean" => Ok(filter::mean_kernel(arg.parse().map_err(|_| bad("size"))?)?),
        "gaussian" => Ok(filter::gaussian_kernel(arg.parse().map_err(|_| bad("sigma"))?)?),
        "file" => {
            let path = Path::new(arg);
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            Kernel::parse(&text).map_err(|e| Failure::Data(format!("{arg}: {e}")))
        }
        _ => Err(bad("kind")),
    }
}

fn warp(args: WarpArgs) -> Outcome {
    let img = read_image(&args.input)?;
    let (w, h) = (img.width(), img.height());
    let pair = |v: &[f64]| match v {
        &[a, b] => Ok((a, b)),
        _ => Err(Failure::Usage(format!("expected two comma-separated values, got {}", v.len()))),
    };
    let map = if let Some(deg) = args.rotate {
        AffineMap::rotate_about_center(deg, w, h)
    } else {
        let t = if let Some(s) = &args.scale {
            let (sx, sy) = pair(s)?;
            Transform::Scale { sx, sy }
        } else if let Some(s) = &args.shear {
            let (kx, ky) = pair(s)?;
            Transform::Shear { kx, ky }
        } else if let Some(s) = &args.translate {
            let (dx, dy) = pair(s)?;
            Transform::Translation { dx, dy }
        } else {
            match args.reflect.expect("clap requires one transform") {
                ReflectAxis::X => Transform::Reflection(Axis::X),
                ReflectAxis::Y => Transform::Reflection(Axis::Y),
            }
        };
        geometry::make_map(t)?.about((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
    };
    let mode = match args.interp {
        Interp::Nearest => InterpMode::Nearest,
        Interp::Bilinear => InterpMode::Bilinear,
    };
    write_image(&args.out, &geometry::warp(&img, &map, mode, (w, h))?)
}

fn corners(args: CornerArgs) -> Outcome {
    let img = read_image(&args.input)?;
    let found = match args.detector {
        Detector::Moravec => features::moravec(
            &img,
            &MoravecParams {
                window: args.window,
                threshold_frac: args.threshold,
                eight_offsets: args.eight_offsets,
                nms_radius: args.nms_radius,
            },
        )?,
        Detector::Harris => features::harris(
            &img,
            &HarrisParams { sigma: args.sigma, k: args.k, threshold_frac: args.threshold, nms_radius: args.nms_radius },
        )?,
    };
    if let Some(p) = &args.annotate {
        write_image(p, &features::annotate(&img, &found))?;
    }
    emit(args.out.as_deref(), &features::corners_csv(&found))
}

fn train(args: TrainArgs) -> Outcome {
    let ds = Dataset::load_dir(&args.data).map_err(|e| io_failure(&args.data, e))??;
    if ds.num_classes() < 2 {
        return Err(Failure::Data(format!("{}: need at least two class subdirectories", args.data.display())));
    }
    let [c, h, w] = ds.sample_shape()[..] else {
        return Err(Failure::Data("training images must be 2-D".into()));
    };
    let mut net = match args.arch {
        Arch::SmallCnn => Network::small_cnn(c, h, w, ds.num_classes(), args.seed)?,
    };
    let cfg = TrainConfig {
        lr: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        test_fraction: args.test_frac,
        seed: args.seed,
    };
    let (metrics, _, _) = nn::train(&mut net, &ds, &cfg)?;
    write(&args.out, save_weights(&net))?;
    if let Some(p) = &args.metrics {
        write(p, metrics.to_csv())?;
    }
    if let Some(last) = metrics.last() {
        eprintln!(
            "classes: {}; final train accuracy {:.3}, test accuracy {:.3}",
            ds.class_names().join(","),
            last.train_accuracy,
            last.test_accuracy
        );
    }
    Ok(())
}
