//! Site sets, per-site state spaces and configurations.
//!
//! States are integer indices `0..|X^t|`. Every dense table in this crate is
//! indexed by the canonical enumeration of configurations: lexicographic in
//! the site order of the [`ConfigSpace`], last site varying fastest.
//! Boundary conditions `z` on `Λ \ {t}` use the same rule restricted to the
//! remaining sites.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of configurations of a space.
pub const DEFAULT_MAX_CONFIGS: usize = 1 << 24;

/// Site subsets are bitmasks, which bounds the number of sites.
pub const MAX_SITES: usize = 64;

/// Environment variable overriding [`DEFAULT_MAX_CONFIGS`].
pub const MAX_CONFIGS_ENV: &str = "FINFIELD_MAX_CONFIGS";

/// The configuration cap in effect for this process.
pub fn config_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(MAX_CONFIGS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&v| v > 0)
            .unwrap_or(DEFAULT_MAX_CONFIGS)
    })
}

/// A subset of sites, stored as a bitmask over site indices.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteSet(u64);

impl SiteSet {
    pub const fn empty() -> Self {
        SiteSet(0)
    }

    pub const fn from_bits(bits: u64) -> Self {
        SiteSet(bits)
    }

    pub fn single(site: usize) -> Self {
        debug_assert!(site < MAX_SITES);
        SiteSet(1 << site)
    }

    /// The first `n` sites.
    pub fn first(n: usize) -> Self {
        if n >= 64 {
            SiteSet(u64::MAX)
        } else {
            SiteSet((1u64 << n) - 1)
        }
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        indices
            .into_iter()
            .fold(SiteSet::empty(), |acc, i| acc.with(i))
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, site: usize) -> bool {
        site < 64 && self.0 & (1 << site) != 0
    }

    pub fn with(self, site: usize) -> Self {
        SiteSet(self.0 | (1 << site))
    }

    pub fn without(self, site: usize) -> Self {
        SiteSet(self.0 & !(1 << site))
    }

    pub fn union(self, other: Self) -> Self {
        SiteSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        SiteSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        SiteSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Site indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// All subsets of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = SiteSet> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(SiteSet(cur))
        })
    }
}

impl fmt::Debug for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A configuration on a subset of sites.
///
/// `values` lists one state per site of `domain`, in ascending site order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Configuration {
    domain: SiteSet,
    values: Vec<usize>,
}

impl Configuration {
    /// The empty configuration on `∅`.
    pub fn empty() -> Self {
        Configuration::default()
    }

    /// A configuration on the first `states.len()` sites.
    pub fn full(states: Vec<usize>) -> Self {
        Configuration {
            domain: SiteSet::first(states.len()),
            values: states,
        }
    }

    /// Builds a configuration from its domain and values in ascending site order.
    pub fn new(domain: SiteSet, values: Vec<usize>) -> Result<Self> {
        if domain.len() != values.len() {
            return Err(Error::domain(format!(
                "domain has {} sites but {} values were given",
                domain.len(),
                values.len()
            )));
        }
        Ok(Configuration { domain, values })
    }

    pub fn domain(&self) -> SiteSet {
        self.domain
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    /// State at `site`, if the site is in the domain.
    pub fn get(&self, site: usize) -> Option<usize> {
        if !self.domain.contains(site) {
            return None;
        }
        let rank = (self.domain.bits() & ((1u64 << site) - 1)).count_ones() as usize;
        Some(self.values[rank])
    }

    /// Pairs `(site, state)` in ascending site order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.domain.iter().zip(self.values.iter().copied())
    }

    /// The restriction of `self` to `sites`.
    pub fn restrict(&self, sites: SiteSet) -> Result<Configuration> {
        if !sites.is_subset(self.domain) {
            return Err(Error::domain(format!(
                "cannot restrict a configuration on {:?} to {:?}",
                self.domain, sites
            )));
        }
        let values = self
            .iter()
            .filter(|(s, _)| sites.contains(*s))
            .map(|(_, v)| v)
            .collect();
        Ok(Configuration {
            domain: sites,
            values,
        })
    }

    /// Concatenation `xy` of configurations with disjoint domains.
    pub fn concat(&self, other: &Configuration) -> Result<Configuration> {
        if !self.domain.is_disjoint(other.domain) {
            return Err(Error::domain(format!(
                "cannot concatenate configurations on overlapping domains {:?} and {:?}",
                self.domain, other.domain
            )));
        }
        let domain = self.domain.union(other.domain);
        let mut values = Vec::with_capacity(domain.len());
        for site in domain.iter() {
            let v = self.get(site).or_else(|| other.get(site)).expect("site in union");
            values.push(v);
        }
        Ok(Configuration { domain, values })
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    sites: Vec<String>,
    cardinalities: Vec<usize>,
}

/// The site set `Λ` together with the per-site state counts `|X^t|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct ConfigSpace {
    sites: Vec<String>,
    cards: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl TryFrom<SpaceRepr> for ConfigSpace {
    type Error = Error;

    fn try_from(r: SpaceRepr) -> Result<Self> {
        ConfigSpace::new(r.sites, r.cardinalities)
    }
}

impl From<ConfigSpace> for SpaceRepr {
    fn from(s: ConfigSpace) -> Self {
        SpaceRepr {
            sites: s.sites,
            cardinalities: s.cards,
        }
    }
}

impl ConfigSpace {
    /// Builds a space under the process-wide cap (see [`config_cap`]).
    pub fn new<S: Into<String>>(
        sites: impl IntoIterator<Item = S>,
        cards: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        Self::with_cap(sites, cards, config_cap())
    }

    pub fn with_cap<S: Into<String>>(
        sites: impl IntoIterator<Item = S>,
        cards: impl IntoIterator<Item = usize>,
        cap: usize,
    ) -> Result<Self> {
        let sites: Vec<String> = sites.into_iter().map(Into::into).collect();
        let cards: Vec<usize> = cards.into_iter().collect();
        if sites.len() != cards.len() {
            return Err(Error::domain(format!(
                "{} sites but {} cardinalities",
                sites.len(),
                cards.len()
            )));
        }
        if sites.len() > MAX_SITES {
            return Err(Error::domain(format!(
                "{} sites exceeds the limit of {MAX_SITES}",
                sites.len()
            )));
        }
        for (i, name) in sites.iter().enumerate() {
            if sites[..i].contains(name) {
                return Err(Error::domain(format!("duplicate site `{name}`")));
            }
        }
        if let Some(i) = cards.iter().position(|&c| c == 0) {
            return Err(Error::domain(format!("site `{}` has no states", sites[i])));
        }
        let configs = cards.iter().map(|&c| c as u128).product::<u128>();
        if configs > cap as u128 {
            return Err(Error::SpaceTooLarge { configs, cap });
        }
        let mut strides = vec![1usize; cards.len()];
        for i in (0..cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1];
        }
        Ok(ConfigSpace {
            sites,
            cards,
            strides,
            total: configs as usize,
        })
    }

    /// `n` sites named `s0, s1, ...`, each with `card` states.
    pub fn uniform(n: usize, card: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("s{i}")), std::iter::repeat_n(card, n))
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn site_name(&self, site: usize) -> &str {
        &self.sites[site]
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn card(&self, site: usize) -> usize {
        self.cards[site]
    }

    /// `|X^Λ|`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn all(&self) -> SiteSet {
        SiteSet::first(self.n_sites())
    }

    pub fn site_index(&self, name: &str) -> Result<usize> {
        self.sites
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownSite(name.to_string()))
    }

    pub fn site_set<S: AsRef<str>>(&self, names: impl IntoIterator<Item = S>) -> Result<SiteSet> {
        names.into_iter().try_fold(SiteSet::empty(), |acc, n| {
            Ok(acc.with(self.site_index(n.as_ref())?))
        })
    }

    pub fn names(&self, set: SiteSet) -> Vec<String> {
        set.iter().map(|i| self.sites[i].clone()).collect()
    }

    pub fn check_set(&self, set: SiteSet) -> Result<()> {
        if set.is_subset(self.all()) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "site set {set:?} is not contained in a space of {} sites",
                self.n_sites()
            )))
        }
    }

    /// Validates that every value of `x` is a state of its site.
    pub fn check_config(&self, x: &Configuration) -> Result<()> {
        self.check_set(x.domain())?;
        for (site, v) in x.iter() {
            if v >= self.cards[site] {
                return Err(Error::domain(format!(
                    "state {v} out of range at site `{}` (|X| = {})",
                    self.sites[site], self.cards[site]
                )));
            }
        }
        Ok(())
    }

    /// Builds a configuration from `(site name, state)` pairs.
    pub fn assign<S: AsRef<str>>(&self, pairs: &[(S, usize)]) -> Result<Configuration> {
        let mut entries = Vec::with_capacity(pairs.len());
        let mut domain = SiteSet::empty();
        for (name, v) in pairs {
            let i = self.site_index(name.as_ref())?;
            if domain.contains(i) {
                return Err(Error::domain(format!("site `{}` assigned twice", name.as_ref())));
            }
            domain = domain.with(i);
            entries.push((i, *v));
        }
        entries.sort_unstable();
        let x = Configuration::new(domain, entries.into_iter().map(|(_, v)| v).collect())?;
        self.check_config(&x)?;
        Ok(x)
    }

    /// Number of configurations on `set`.
    pub fn count(&self, set: SiteSet) -> usize {
        set.iter().map(|i| self.cards[i]).product()
    }

    /// Number of boundary conditions `z ∈ X^{Λ\{t}}`.
    pub fn boundary_count(&self, site: usize) -> usize {
        self.total / self.cards[site]
    }

    /// Canonical index of a full configuration given as one state per site.
    pub fn index(&self, states: &[usize]) -> usize {
        debug_assert_eq!(states.len(), self.n_sites());
        states.iter().zip(&self.strides).map(|(x, s)| x * s).sum()
    }

    /// Per-site states of the configuration with canonical index `idx`.
    pub fn states(&self, idx: usize) -> Vec<usize> {
        (0..self.n_sites()).map(|t| self.state_at(idx, t)).collect()
    }

    /// Index step of one state change at `site`.
    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    pub fn state_at(&self, idx: usize, site: usize) -> usize {
        idx / self.strides[site] % self.cards[site]
    }

    /// Index of the configuration equal to `idx` except that `site` takes `state`.
    pub fn with_state(&self, idx: usize, site: usize, state: usize) -> usize {
        let stride = self.strides[site];
        idx - self.state_at(idx, site) * stride + state * stride
    }

    /// Splits a full index into the state at `site` and the boundary index.
    pub fn split(&self, site: usize, idx: usize) -> (usize, usize) {
        let stride = self.strides[site];
        let block = stride * self.cards[site];
        let x = idx / stride % self.cards[site];
        let z = idx / block * stride + idx % stride;
        (x, z)
    }

    /// Inverse of [`ConfigSpace::split`].
    pub fn join(&self, site: usize, state: usize, boundary: usize) -> usize {
        let stride = self.strides[site];
        let block = stride * self.cards[site];
        boundary / stride * block + state * stride + boundary % stride
    }

    /// Canonical index of a full configuration.
    pub fn index_of(&self, x: &Configuration) -> Result<usize> {
        if x.domain() != self.all() {
            return Err(Error::domain("expected a configuration on every site"));
        }
        self.check_config(x)?;
        Ok(self.index(x.values()))
    }

    /// The full configuration with canonical index `idx`.
    pub fn config(&self, idx: usize) -> Configuration {
        Configuration::full(self.states(idx))
    }

    /// The boundary configuration on `Λ \ {site}` with boundary index `z`.
    pub fn boundary(&self, site: usize, z: usize) -> Configuration {
        let full = self.join(site, 0, z);
        self.config(full)
            .restrict(self.all().without(site))
            .expect("subset of full domain")
    }

    /// The space restricted to the sites of `set`, in the same order.
    pub fn subspace(&self, set: SiteSet) -> Result<ConfigSpace> {
        self.check_set(set)?;
        ConfigSpace::with_cap(
            set.iter().map(|i| self.sites[i].clone()),
            set.iter().map(|i| self.cards[i]),
            usize::MAX,
        )
    }

    /// Index in `subspace(set)` of the restriction of full configuration `idx`.
    pub fn project(&self, idx: usize, set: SiteSet) -> usize {
        set.iter()
            .fold(0, |acc, t| acc * self.cards[t] + self.state_at(idx, t))
    }

    /// Index in `subspace(x.domain())` of the configuration `x`.
    pub fn sub_index(&self, x: &Configuration) -> usize {
        x.iter().fold(0, |acc, (t, v)| acc * self.cards[t] + v)
    }

    /// All configurations on `set` in canonical order (last site fastest).
    pub fn enumerate(&self, set: SiteSet) -> Result<Vec<Configuration>> {
        self.check_set(set)?;
        let sites: Vec<usize> = set.iter().collect();
        let count = self.count(set);
        let mut out = Vec::with_capacity(count);
        let mut values = vec![0usize; sites.len()];
        for _ in 0..count {
            out.push(Configuration {
                domain: set,
                values: values.clone(),
            });
            for k in (0..sites.len()).rev() {
                values[k] += 1;
                if values[k] < self.cards[sites[k]] {
                    break;
                }
                values[k] = 0;
            }
        }
        Ok(out)
    }
}
