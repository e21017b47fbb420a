use std::fmt;

/// An element of `{0,1}^N`: the set of clusters an image or a caption was
/// assigned to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryClusterVector {
    bits: Vec<bool>,
}

impl BinaryClusterVector {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Vector of length `n` with the given clusters set. Indices `>= n` are ignored.
    pub fn from_clusters(n: usize, clusters: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(n);
        for c in clusters {
            if c < n {
                v.bits[c] = true;
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, cluster: usize) -> bool {
        self.bits.get(cluster).copied().unwrap_or(false)
    }

    pub fn set(&mut self, cluster: usize, value: bool) {
        self.bits[cluster] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Indices of the set bits, ascending.
    pub fn clusters(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn none(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn all(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }
}

impl fmt::Display for BinaryClusterVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
