use rand::Rng;

use super::arch::{Dense, HeadOffsets, ModelArch, Offsets, IN_CHANNELS};
use super::layers::*;
use super::real::Real;
use crate::rng::{rng_from, stream};

/// He-uniform weights (`±sqrt(6 / fan_in)`), zero biases.
pub fn init_params<T: Real>(arch: &ModelArch, seed: u64) -> Vec<T> {
    let o = Offsets::new(arch);
    let mut rng = rng_from(seed, &[stream::INIT]);
    let mut p = vec![T::zero(); o.total];
    for layer in o.layers() {
        let bound = (6.0 / layer.inp as f64).sqrt();
        for v in &mut p[layer.w..layer.b] {
            *v = T::of(rng.gen_range(-bound..bound));
        }
    }
    p
}

/// Converts an HWC `u8` image into CHW values in `[0, 1]`.
pub(crate) fn to_chw<T: Real>(pixels: &[u8], h: usize, w: usize, out: &mut [T]) {
    let scale = T::of(1.0 / 255.0);
    let plane = h * w;
    for (p, px) in pixels.chunks_exact(IN_CHANNELS).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            out[c * plane + p] = T::of(v as f64) * scale;
        }
    }
}

fn slice<T>(p: &[T], d: Dense) -> (&[T], &[T]) {
    (&p[d.w..d.b], &p[d.b..d.end()])
}

fn slice_mut<T>(p: &mut [T], d: Dense) -> (&mut [T], &mut [T]) {
    let (w, b) = p[d.w..d.end()].split_at_mut(d.b - d.w);
    (w, b)
}

/// Per-sample buffers for forward and backward passes. One workspace per
/// thread; `x` is the input in CHW order.
pub(crate) struct Workspace<T> {
    pub arch: ModelArch,
    o: Offsets,
    t1: Im2Col,
    t2: Im2Col,
    pub x: Vec<T>,
    cols1: Vec<T>,
    a1: Vec<T>,
    p1: Vec<T>,
    arg1: Vec<u32>,
    cols2: Vec<T>,
    a2: Vec<T>,
    p2: Vec<T>,
    arg2: Vec<u32>,
    pub h: Vec<T>,
    dh: Vec<T>,
    dflat: Vec<T>,
    da2: Vec<T>,
    dcols2: Vec<T>,
    dp1: Vec<T>,
    da1: Vec<T>,
    wt: Vec<T>,
    dwt: Vec<T>,
    // head
    pub out: Vec<T>,
    dout: Vec<T>,
    pub logvar: Vec<T>,
    pub eps: Vec<T>,
    z: Vec<T>,
    dz: Vec<T>,
    dmu: Vec<T>,
    dlogvar: Vec<T>,
    hd: Vec<T>,
    dhd: Vec<T>,
    rec: Vec<T>,
    drec: Vec<T>,
}

impl<T: Real> Workspace<T> {
    pub fn new(arch: &ModelArch) -> Self {
        let b = arch.backbone();
        let [(h1, w1), (h2, w2), _] = b.spatial();
        let (c1, c2, d) = (b.conv1 as usize, b.conv2 as usize, b.feature_dim as usize);
        let z = |n: usize| vec![T::zero(); n];
        let (head_out, latent, hidden) = match *arch {
            ModelArch::Classifier { classes, .. } => (classes as usize, 0, 0),
            ModelArch::Vae { latent, hidden, .. } => (latent as usize, latent as usize, hidden as usize),
        };
        let pixels = if latent > 0 { b.input_len() } else { 0 };
        Self {
            arch: *arch,
            o: Offsets::new(arch),
            t1: Im2Col::new(IN_CHANNELS, h1, w1),
            t2: Im2Col::new(c1, h2, w2),
            x: z(b.input_len()),
            cols1: z(IN_CHANNELS * 9 * h1 * w1),
            a1: z(c1 * h1 * w1),
            p1: z(c1 * h2 * w2),
            arg1: vec![0; c1 * h2 * w2],
            cols2: z(c1 * 9 * h2 * w2),
            a2: z(c2 * h2 * w2),
            p2: z(b.flat_len()),
            arg2: vec![0; b.flat_len()],
            h: z(d),
            dh: z(d),
            dflat: z(b.flat_len()),
            da2: z(c2 * h2 * w2),
            dcols2: z(c1 * 9 * h2 * w2),
            dp1: z(c1 * h2 * w2),
            da1: z(c1 * h1 * w1),
            wt: Vec::new(),
            dwt: Vec::new(),
            out: z(head_out),
            dout: z(head_out),
            logvar: z(latent),
            eps: z(latent),
            z: z(latent),
            dz: z(latent),
            dmu: z(latent),
            dlogvar: z(latent),
            hd: z(hidden),
            dhd: z(hidden),
            rec: z(pixels),
            drec: z(pixels),
        }
    }

    pub fn load_image(&mut self, pixels: &[u8]) {
        let b = self.arch.backbone();
        to_chw(pixels, b.height as usize, b.width as usize, &mut self.x);
    }

    /// Backbone forward pass on `self.x`; the representation lands in `self.h`.
    #[inline(always)]
    fn backbone_forward_impl(&mut self, p: &[T]) {
        let [(h1, w1), (h2, w2), _] = self.arch.backbone().spatial();
        let (c1, c2) = (self.o.conv1.out, self.o.conv2.out);
        self.t1.gather(&self.x, &mut self.cols1);
        let (w, b) = slice(p, self.o.conv1);
        conv_forward(w, b, &self.cols1, self.t1.rows, self.t1.cols, &mut self.a1);
        relu_inplace(&mut self.a1);
        maxpool_forward(&self.a1, c1, h1, w1, &mut self.p1, &mut self.arg1);
        self.t2.gather(&self.p1, &mut self.cols2);
        let (w, b) = slice(p, self.o.conv2);
        conv_forward(w, b, &self.cols2, self.t2.rows, self.t2.cols, &mut self.a2);
        relu_inplace(&mut self.a2);
        maxpool_forward(&self.a2, c2, h2, w2, &mut self.p2, &mut self.arg2);
        let (w, b) = slice(p, self.o.fc);
        dense_forward(w, b, &self.p2, &mut self.h);
        relu_inplace(&mut self.h);
    }

    /// Backbone backward pass from `self.dh`, accumulating into `g`.
    #[inline(always)]
    fn backbone_backward_impl(&mut self, p: &[T], g: &mut [T]) {
        relu_mask(&self.h, &mut self.dh);
        let (w, _) = slice(p, self.o.fc);
        let (dw, db) = slice_mut(g, self.o.fc);
        dense_backward(w, &self.p2, &self.dh, dw, db, Some(&mut self.dflat));
        maxpool_backward(&self.dflat, &self.arg2, &mut self.da2);
        relu_mask(&self.a2, &mut self.da2);
        let (w, _) = slice(p, self.o.conv2);
        let (dw, db) = slice_mut(g, self.o.conv2);
        conv_backward(w, &self.cols2, &self.da2, self.t2.rows, self.t2.cols, dw, db, Some(&mut self.dcols2), &mut self.wt, &mut self.dwt);
        self.dp1.fill(T::zero());
        self.t2.scatter_add(&self.dcols2, &mut self.dp1);
        maxpool_backward(&self.dp1, &self.arg1, &mut self.da1);
        relu_mask(&self.a1, &mut self.da1);
        let (w, _) = slice(p, self.o.conv1);
        let (dw, db) = slice_mut(g, self.o.conv1);
        conv_backward(w, &self.cols1, &self.da1, self.t1.rows, self.t1.cols, dw, db, None, &mut self.wt, &mut self.dwt);
    }

    /// Classifier forward; logits land in `self.out`.
    #[inline(always)]
    fn classifier_forward_impl(&mut self, p: &[T]) {
        self.backbone_forward_impl(p);
        let HeadOffsets::Classifier(head) = self.o.head else { panic!("not a classifier") };
        let (w, b) = slice(p, head);
        dense_forward(w, b, &self.h, &mut self.out);
    }

    /// Loss for one labelled sample; gradients are added into `g`.
    /// Returns the loss and whether the arg-max prediction was correct.
    #[inline(always)]
    fn classifier_step_impl(&mut self, p: &[T], label: usize, smoothing: T, g: &mut [T]) -> (T, bool) {
        self.classifier_forward_impl(p);
        let correct = argmax(&self.out) == label;
        let loss = smoothed_cross_entropy(&self.out, label, smoothing, &mut self.dout);
        let HeadOffsets::Classifier(head) = self.o.head else { unreachable!() };
        let (w, _) = slice(p, head);
        let (dw, db) = slice_mut(g, head);
        dense_backward(w, &self.h, &self.dout, dw, db, Some(&mut self.dh));
        self.backbone_backward_impl(p, g);
        (loss, correct)
    }

    /// Encoder forward: mean lands in `self.out`, log-variance in `self.logvar`.
    #[inline(always)]
    fn encoder_forward_impl(&mut self, p: &[T]) {
        self.backbone_forward_impl(p);
        let HeadOffsets::Vae { mu, logvar, .. } = self.o.head else { panic!("not a VAE") };
        let (w, b) = slice(p, mu);
        dense_forward(w, b, &self.h, &mut self.out);
        let (w, b) = slice(p, logvar);
        dense_forward(w, b, &self.h, &mut self.logvar);
    }

    /// Summed squared reconstruction error plus `beta` times the KL term to a
    /// standard normal, for one sample with noise `self.eps`. Returns
    /// (total loss, KL term).
    #[inline(always)]
    fn vae_step_impl(&mut self, p: &[T], beta: T, g: &mut [T]) -> (T, T) {
        self.encoder_forward_impl(p);
        let HeadOffsets::Vae { mu, logvar, dec1, dec2 } = self.o.head else { unreachable!() };
        let half = T::of(0.5);
        for i in 0..self.z.len() {
            self.z[i] = self.out[i] + (half * self.logvar[i]).exp() * self.eps[i];
        }
        let (w, b) = slice(p, dec1);
        dense_forward(w, b, &self.z, &mut self.hd);
        relu_inplace(&mut self.hd);
        let (w, b) = slice(p, dec2);
        dense_forward(w, b, &self.hd, &mut self.rec);
        let mut recon = T::zero();
        for i in 0..self.rec.len() {
            let y = sigmoid(self.rec[i]);
            let diff = y - self.x[i];
            recon = recon + diff * diff;
            self.drec[i] = T::of(2.0) * diff * y * (T::one() - y);
        }
        let kl = kl_divergence(&self.out, &self.logvar);

        let (w, _) = slice(p, dec2);
        let (dw, db) = slice_mut(g, dec2);
        dense_backward(w, &self.hd, &self.drec, dw, db, Some(&mut self.dhd));
        relu_mask(&self.hd, &mut self.dhd);
        let (w, _) = slice(p, dec1);
        let (dw, db) = slice_mut(g, dec1);
        dense_backward(w, &self.z, &self.dhd, dw, db, Some(&mut self.dz));
        for i in 0..self.dz.len() {
            let sd = (half * self.logvar[i]).exp();
            self.dmu[i] = self.dz[i] + beta * self.out[i];
            self.dlogvar[i] = self.dz[i] * self.eps[i] * half * sd + beta * half * (sd * sd - T::one());
        }
        let (w, _) = slice(p, mu);
        let (dw, db) = slice_mut(g, mu);
        dense_backward(w, &self.h, &self.dmu, dw, db, Some(&mut self.dh));
        let (w, _) = slice(p, logvar);
        let (dw, db) = slice_mut(g, logvar);
        dense_backward(w, &self.h, &self.dlogvar, dw, db, None);
        // dh accumulates both heads
        for o in 0..self.dlogvar.len() {
            let go = self.dlogvar[o];
            let inp = self.h.len();
            axpy(go, &w[o * inp..(o + 1) * inp], &mut self.dh);
        }
        self.backbone_backward_impl(p, g);
        (recon + beta * kl, kl)
    }
}


/// Runs `$body` compiled for AVX2 when the CPU supports it. No fused
/// multiply-add is enabled and every kernel fixes its summation order, so
/// both code paths produce bit-identical results.
macro_rules! dispatch {
    ($name:ident($($arg:ident: $ty:ty),*) -> $ret:ty => $impl:ident) => {
        pub fn $name(&mut self, $($arg: $ty),*) -> $ret {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx2")]
                fn fast<T: Real>(ws: &mut Workspace<T>, $($arg: $ty),*) -> $ret {
                    ws.$impl($($arg),*)
                }
                if std::is_x86_feature_detected!("avx2") {
                    // SAFETY: the CPU supports AVX2, checked above.
                    return unsafe { fast(self, $($arg),*) };
                }
            }
            self.$impl($($arg),*)
        }
    };
}

impl<T: Real> Workspace<T> {
    dispatch!(backbone_forward(p: &[T]) -> () => backbone_forward_impl);
    dispatch!(classifier_forward(p: &[T]) -> () => classifier_forward_impl);
    dispatch!(classifier_step(p: &[T], label: usize, smoothing: T, g: &mut [T]) -> (T, bool) => classifier_step_impl);
    dispatch!(encoder_forward(p: &[T]) -> () => encoder_forward_impl);
    dispatch!(vae_step(p: &[T], beta: T, g: &mut [T]) -> (T, T) => vae_step_impl);
}

/// `-0.5 Σ (1 + logvar - mu² - exp(logvar))`.
pub fn kl_divergence<T: Real>(mu: &[T], logvar: &[T]) -> T {
    let half = T::of(0.5);
    -half * mu.iter().zip(logvar).map(|(&m, &lv)| T::one() + lv - m * m - lv.exp()).sum::<T>()
}

pub(crate) fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean label-smoothed cross-entropy and its gradient over a batch of CHW
/// inputs (each `3 * h * w` long).
pub fn classifier_loss_and_gradients<T: Real>(
    arch: &ModelArch,
    params: &[T],
    inputs: &[Vec<T>],
    labels: &[u32],
    smoothing: f64,
) -> (T, Vec<T>) {
    let mut ws = Workspace::new(arch);
    let mut g = vec![T::zero(); params.len()];
    let mut total = T::zero();
    for (x, &y) in inputs.iter().zip(labels) {
        ws.x.copy_from_slice(x);
        total = total + ws.classifier_step(params, y as usize, T::of(smoothing), &mut g).0;
    }
    scale(&mut g, inputs.len());
    (total / T::of(inputs.len() as f64), g)
}

/// Mean VAE loss and gradient with fixed noise `eps` (one latent-sized
/// vector per input).
pub fn vae_loss_and_gradients<T: Real>(
    arch: &ModelArch,
    params: &[T],
    inputs: &[Vec<T>],
    eps: &[Vec<T>],
    beta: f64,
) -> (T, Vec<T>) {
    let mut ws = Workspace::new(arch);
    let mut g = vec![T::zero(); params.len()];
    let mut total = T::zero();
    for (x, e) in inputs.iter().zip(eps) {
        ws.x.copy_from_slice(x);
        ws.eps.copy_from_slice(e);
        total = total + ws.vae_step(params, T::of(beta), &mut g).0;
    }
    scale(&mut g, inputs.len());
    (total / T::of(inputs.len() as f64), g)
}

/// Classifier logits for one CHW input.
pub fn classifier_logits<T: Real>(arch: &ModelArch, params: &[T], input: &[T]) -> Vec<T> {
    let mut ws = Workspace::new(arch);
    ws.x.copy_from_slice(input);
    ws.classifier_forward(params);
    ws.out
}

pub(crate) fn scale<T: Real>(g: &mut [T], n: usize) {
    let inv = T::one() / T::of(n as f64);
    for v in g {
        *v = *v * inv;
    }
}
