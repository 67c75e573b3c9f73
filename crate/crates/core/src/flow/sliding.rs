use std::collections::VecDeque;

/// Volume in `(t_now − window, t_now]` divided by `window`.
pub fn i_sliding(trades: &[(f64, f64)], window: f64, t_now: f64) -> f64 {
    let lo = t_now - window;
    let volume: f64 = trades
        .iter()
        .filter(|&&(t, _)| t > lo && t <= t_now)
        .map(|&(_, v)| v)
        .sum();
    volume / window
}

/// Incremental form of [`i_sliding`] for time-ordered trades.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    window: f64,
    trades: VecDeque<(f64, f64)>,
    volume: f64,
}

impl SlidingWindow {
    pub fn new(window: f64) -> Self {
        assert!(window > 0.0, "window must be positive");
        Self {
            window,
            trades: VecDeque::new(),
            volume: 0.0,
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn push(&mut self, t: f64, shares: f64) {
        self.trades.push_back((t, shares));
        self.volume += shares;
    }

    /// Rate at `t_now`; trades at or before `t_now − window` are dropped.
    pub fn rate(&mut self, t_now: f64) -> f64 {
        let lo = t_now - self.window;
        while let Some(&(t, v)) = self.trades.front() {
            if t > lo {
                break;
            }
            self.trades.pop_front();
            self.volume -= v;
        }
        if self.trades.is_empty() {
            self.volume = 0.0;
        }
        self.volume / self.window
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_window_is_zero() {
        assert_eq!(i_sliding(&[(1.0, 50.0)], 10.0, 100.0), 0.0);
        let mut w = SlidingWindow::new(10.0);
        assert_eq!(w.rate(3.0), 0.0);
    }

    #[test]
    fn direct_division() {
        let trades = [(10.0, 200.0), (100.0, 300.0)];
        assert_eq!(i_sliding(&trades, 128.0, 128.0), 3.90625);
        let mut w = SlidingWindow::new(128.0);
        for &(t, v) in &trades {
            w.push(t, v);
        }
        assert_eq!(w.rate(128.0), 3.90625);
        // left edge is open
        assert_eq!(w.rate(138.0), 300.0 / 128.0);
    }
}
