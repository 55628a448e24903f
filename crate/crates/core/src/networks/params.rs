pub type ParamVisitor<'a> = dyn FnMut(&str, &[usize], &[f32]) + 'a;
pub type ParamVisitorMut<'a> = dyn FnMut(&str, &mut [f32]) + 'a;

/// Anything holding named trainable (or frozen) `f32` parameter blocks.
/// Both visitors must walk the blocks in the same, stable order; that order
/// is the serialization order of the weights container.
pub trait Parameterized {
    fn visit_params(&self, f: &mut ParamVisitor<'_>);
    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>);

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, _, d| n += d.len());
        n
    }

    /// Copies every block out, in visiting order.
    fn snapshot(&self) -> Vec<Vec<f32>> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, _, d| out.push(d.to_vec()));
        out
    }

    /// FNV-1a over the raw bits of every parameter; equal fingerprints mean
    /// bit-identical weights for all practical purposes.
    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        self.visit_params(&mut |_, _, d| {
            for v in d {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        });
        h
    }
}

impl<A: Parameterized, B: Parameterized> Parameterized for (A, B) {
    fn visit_params(&self, f: &mut ParamVisitor<'_>) {
        self.0.visit_params(f);
        self.1.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        self.0.visit_params_mut(f);
        self.1.visit_params_mut(f);
    }
}
