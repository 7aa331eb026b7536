//! FIFO origin task queue served by a fixed pool of workers.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::Timestamp;

pub const ORIGIN_WORKERS: usize = 10;

#[derive(Debug, Clone)]
pub struct OriginQueue<T> {
    workers: usize,
    busy: usize,
    waiting: VecDeque<T>,
    peak_busy: usize,
}

impl<T> OriginQueue<T> {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1), busy: 0, waiting: VecDeque::new(), peak_busy: 0 }
    }

    /// Admits a task; returns it back when a worker is free to start it now.
    pub fn submit(&mut self, task: T) -> Option<T> {
        if self.busy < self.workers && self.waiting.is_empty() {
            self.busy += 1;
            self.peak_busy = self.peak_busy.max(self.busy);
            Some(task)
        } else {
            self.waiting.push_back(task);
            None
        }
    }

    /// Releases a worker; returns the next task to start, if any.
    pub fn release(&mut self) -> Option<T> {
        self.busy -= 1;
        let next = self.waiting.pop_front()?;
        self.busy += 1;
        Some(next)
    }

    pub fn busy(&self) -> usize {
        self.busy
    }

    pub fn waiting(&self) -> usize {
        self.waiting.len()
    }

    pub fn peak_busy(&self) -> usize {
        self.peak_busy
    }
}

/// Queueing delays of tasks with fixed service times, `arrivals` sorted.
pub fn fifo_latencies(arrivals: &[Timestamp], service: &[f64], workers: usize) -> Vec<f64> {
    let mut free_at = vec![0.0f64; workers.max(1)];
    arrivals
        .iter()
        .zip(service)
        .map(|(&a, &s)| {
            let (w, &t) = free_at
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(&y.0)))
                .unwrap();
            let start = a.max(t);
            free_at[w] = start + s;
            start - a
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleventh_arrival_waits_one_service() {
        let lat = fifo_latencies(&[0.0; 11], &[1.0; 11], ORIGIN_WORKERS);
        assert!(lat[..10].iter().all(|l| *l == 0.0));
        assert_eq!(lat[10], 1.0);
    }

    #[test]
    fn queue_admits_up_to_worker_count() {
        let mut q = OriginQueue::new(2);
        assert_eq!(q.submit(1), Some(1));
        assert_eq!(q.submit(2), Some(2));
        assert_eq!(q.submit(3), None);
        assert_eq!(q.release(), Some(3));
        assert_eq!(q.release(), None);
        assert_eq!((q.busy(), q.peak_busy()), (1, 2));
    }
}
