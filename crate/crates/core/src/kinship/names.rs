//! Gendered first-name pool, shipped as a data file.

use super::schema::Gender;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;

const RAW: &str = include_str!("../../data/first_names.txt");

/// Pool of unique single-token gendered names.
#[derive(Debug, Clone)]
pub struct NamePool {
    male: Vec<String>,
    female: Vec<String>,
}

impl NamePool {
    /// The full shipped pool (240 names, 120 per gender).
    pub fn shipped() -> Self {
        let mut male = Vec::new();
        let mut female = Vec::new();
        for line in RAW.lines() {
            let mut it = line.split_whitespace();
            let (Some(name), Some(g)) = (it.next(), it.next()) else { continue };
            match g {
                "M" => male.push(name.to_string()),
                "F" => female.push(name.to_string()),
                _ => {}
            }
        }
        NamePool { male, female }
    }

    /// A deterministic subset with `per_gender` names of each gender.
    /// Smaller pools make every name frequent in small training sets.
    pub fn shipped_subset(per_gender: usize) -> Result<Self> {
        let full = Self::shipped();
        if per_gender > full.male.len() || per_gender > full.female.len() {
            return Err(Error::NamePoolExhausted {
                need: per_gender,
                have: full.male.len().min(full.female.len()),
            });
        }
        Ok(NamePool {
            male: full.male[..per_gender].to_vec(),
            female: full.female[..per_gender].to_vec(),
        })
    }

    /// Split into two gender-balanced pools: the first takes `left_per_gender`
    /// names of each gender, the second the rest.
    pub fn partition(&self, left_per_gender: usize) -> Result<(NamePool, NamePool)> {
        if left_per_gender >= self.male.len() || left_per_gender >= self.female.len() {
            return Err(Error::NamePoolExhausted {
                need: left_per_gender + 1,
                have: self.male.len().min(self.female.len()),
            });
        }
        Ok((
            NamePool {
                male: self.male[..left_per_gender].to_vec(),
                female: self.female[..left_per_gender].to_vec(),
            },
            NamePool {
                male: self.male[left_per_gender..].to_vec(),
                female: self.female[left_per_gender..].to_vec(),
            },
        ))
    }

    pub fn count(&self, gender: Gender) -> usize {
        match gender {
            Gender::Male => self.male.len(),
            Gender::Female => self.female.len(),
        }
    }

    pub fn all_names(&self) -> impl Iterator<Item = &str> {
        self.male.iter().chain(self.female.iter()).map(String::as_str)
    }

    /// Draw `per_gender` unused names of each gender, shuffled.
    pub(crate) fn draw<'a>(&'a self, gender: Gender, rng: &mut crate::rng::Rng) -> DrawnNames<'a> {
        let mut names: Vec<&str> = match gender {
            Gender::Male => self.male.iter().map(String::as_str).collect(),
            Gender::Female => self.female.iter().map(String::as_str).collect(),
        };
        names.shuffle(rng);
        DrawnNames { names, next: 0 }
    }
}

/// Shuffled name sequence consumed without replacement.
pub(crate) struct DrawnNames<'a> {
    names: Vec<&'a str>,
    next: usize,
}

impl<'a> DrawnNames<'a> {
    pub fn take(&mut self) -> Result<&'a str> {
        let name = self.names.get(self.next).ok_or(Error::NamePoolExhausted {
            need: self.next + 1,
            have: self.names.len(),
        })?;
        self.next += 1;
        Ok(name)
    }
}
