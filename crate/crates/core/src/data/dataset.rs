use std::fmt;
use std::str::FromStr;

use super::field::PrecipField;
use super::preprocess::{downsample, normalize};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::format(format!("unknown split '{other}'"))),
        }
    }
}

/// Field counts per split; fields are assigned in chronological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }

    /// Split of the `index`-th field in time order: contiguous, disjoint ranges.
    pub fn split_of(&self, index: usize) -> Option<Split> {
        if index < self.train {
            Some(Split::Train)
        } else if index < self.train + self.validation {
            Some(Split::Validation)
        } else if index < self.total() {
            Some(Split::Test)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub lr: PrecipField,
    pub hr: PrecipField,
}

/// LR/HR pairs of one split, LR obtained by block-averaging HR.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub split: Split,
    pub scale_factor: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn from_hr(
        split: Split,
        fields: Vec<(String, PrecipField)>,
        scale_factor: usize,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(fields.len());
        let mut size = None;
        for (id, hr) in fields {
            if *size.get_or_insert(hr.size()) != hr.size() {
                return Err(Error::shape(
                    "dataset",
                    format!(
                        "field {id} is {0}x{0}, expected {1}x{1}",
                        hr.size(),
                        size.unwrap()
                    ),
                ));
            }
            let lr = downsample(&hr, scale_factor)?;
            samples.push(Sample { id, lr, hr });
        }
        Ok(Self {
            split,
            scale_factor,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn hr_size(&self) -> Option<usize> {
        self.samples.first().map(|s| s.hr.size())
    }

    /// Normalized copies of every pair, ready for batching.
    pub fn normalized(&self) -> Result<NormalizedSet> {
        let hr_size = self.hr_size().unwrap_or(0);
        let lr_size = hr_size / self.scale_factor.max(1);
        let mut lr = Vec::with_capacity(self.len() * lr_size * lr_size);
        let mut hr = Vec::with_capacity(self.len() * hr_size * hr_size);
        for s in &self.samples {
            lr.extend(normalize(&s.lr)?);
            hr.extend(normalize(&s.hr)?);
        }
        Ok(NormalizedSet {
            len: self.len(),
            lr_size,
            hr_size,
            lr,
            hr,
        })
    }
}

/// Flat normalized LR and HR arrays of a dataset.
#[derive(Debug, Clone)]
pub struct NormalizedSet {
    pub len: usize,
    pub lr_size: usize,
    pub hr_size: usize,
    lr: Vec<f64>,
    hr: Vec<f64>,
}

impl NormalizedSet {
    fn gather(src: &[f64], side: usize, indices: &[usize]) -> Result<Tensor> {
        let plane = side * side;
        let mut data = Vec::with_capacity(indices.len() * plane);
        for &i in indices {
            data.extend_from_slice(&src[i * plane..(i + 1) * plane]);
        }
        Tensor::new(vec![indices.len(), 1, side, side], data)
    }

    /// `([B,1,h,w], [B,1,H,W])` tensors for the given sample indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len) {
            return Err(Error::invalid(format!(
                "sample index {bad} out of range {}",
                self.len
            )));
        }
        Ok((
            Self::gather(&self.lr, self.lr_size, indices)?,
            Self::gather(&self.hr, self.hr_size, indices)?,
        ))
    }
}
