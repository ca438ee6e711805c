//! Iterated random-to-top shuffles.
//!
//! A trajectory is fixed by its [`SelectionSequence`]: the card moved to the
//! top at each step. [`apply_naive`] replays it literally; [`apply_fast`]
//! builds the same deck directly: selected cards ordered by their last
//! selection (most recent on top) followed by the never-selected cards in
//! increasing order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// The cards selected, in order, during `picks.len()` shuffles of an
/// `n`-card deck.
///
/// Text form is a single line `n r p1 p2 ... pr`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSequence {
    n: usize,
    picks: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleOutcome {
    pub deck: Permutation,
    /// Number of distinct cards that were ever moved to the top.
    pub distinct_selected: usize,
}

impl SelectionSequence {
    pub fn new(n: usize, picks: Vec<u32>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDeckSize(0));
        }
        if let Some(&pick) = picks.iter().find(|&&p| p == 0 || p as usize > n) {
            return Err(Error::PickOutOfRange { pick, n });
        }
        Ok(Self { n, picks })
    }

    /// `r` picks drawn independently and uniformly from `1..=n`.
    pub fn sample<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDeckSize(0));
        }
        let picks = (0..r).map(|_| rng.random_range(1..=n as u32)).collect();
        Ok(Self { n, picks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.picks.len()
    }

    pub fn picks(&self) -> &[u32] {
        &self.picks
    }
}

impl fmt::Display for SelectionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.n, self.picks.len())?;
        for p in &self.picks {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

impl FromStr for SelectionSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fields = s.split_ascii_whitespace();
        let mut next_num = |what: &str| -> Result<u64> {
            let tok = fields
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?;
            tok.parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad {what} {tok:?}")))
        };
        let n = next_num("deck size")? as usize;
        let r = next_num("shuffle count")? as usize;
        let mut picks = Vec::with_capacity(r);
        for _ in 0..r {
            let p = next_num("pick")?;
            picks.push(u32::try_from(p).map_err(|_| Error::Parse(format!("pick {p} too large")))?);
        }
        if fields.next().is_some() {
            return Err(Error::Parse(format!("more than {r} picks")));
        }
        SelectionSequence::new(n, picks)
    }
}

/// Literal replay: start from the identity and move each picked card to the
/// top. O(r n).
pub fn apply_naive(s: &SelectionSequence) -> ShuffleOutcome {
    let mut deck: Vec<u32> = (1..=s.n as u32).collect();
    for &pick in &s.picks {
        let pos = deck
            .iter()
            .position(|&c| c == pick)
            .expect("validated pick");
        deck[..=pos].rotate_right(1);
    }
    ShuffleOutcome {
        deck: Permutation::from_entries_unchecked(deck),
        distinct_selected: distinct_count(s),
    }
}

/// Same deck as [`apply_naive`] in O(r + n): a reverse scan of the picks
/// lists selected cards by last selection time, newest first, then the
/// unselected cards follow in increasing order.
pub fn apply_fast(s: &SelectionSequence) -> ShuffleOutcome {
    let mut seen = vec![false; s.n + 1];
    let mut deck = Vec::with_capacity(s.n);
    for &pick in s.picks.iter().rev() {
        if !seen[pick as usize] {
            seen[pick as usize] = true;
            deck.push(pick);
        }
    }
    let distinct_selected = deck.len();
    deck.extend((1..=s.n as u32).filter(|&c| !seen[c as usize]));
    ShuffleOutcome {
        deck: Permutation::from_entries_unchecked(deck),
        distinct_selected,
    }
}

fn distinct_count(s: &SelectionSequence) -> usize {
    let mut seen = vec![false; s.n + 1];
    s.picks
        .iter()
        .filter(|&&p| !std::mem::replace(&mut seen[p as usize], true))
        .count()
}

/// Deck after `r` random-to-top shuffles of `n` cards started in order.
pub fn sample_random_to_top<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    rng: &mut R,
) -> Result<ShuffleOutcome> {
    Ok(apply_fast(&SelectionSequence::sample(n, r, rng)?))
}

/// Deck after `r` top-to-random shuffles: the inverse of a random-to-top deck.
pub fn sample_top_to_random<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    rng: &mut R,
) -> Result<Permutation> {
    Ok(sample_random_to_top(n, r, rng)?.deck.invert())
}

/// Every one of the `n^r` selection sequences, in lexicographic order.
pub fn all_selection_sequences(n: usize, r: usize) -> impl Iterator<Item = SelectionSequence> {
    let total = (n as u64).checked_pow(r as u32).expect("n^r overflows u64");
    (0..total).map(move |mut code| {
        let mut picks = vec![0u32; r];
        for slot in picks.iter_mut().rev() {
            *slot = (code % n as u64) as u32 + 1;
            code /= n as u64;
        }
        SelectionSequence { n, picks }
    })
}
