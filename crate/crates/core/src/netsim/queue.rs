use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueStats {
    /// Packets offered to the queue, accepted or not.
    pub arrivals: u64,
    pub departures: u64,
    pub drops: u64,
    pub max_resident: usize,
    pub max_bytes: u64,
}

/// FIFO with a droptail limit in bytes. The packet in service still counts
/// against the limit until it departs.
#[derive(Debug, Clone)]
pub struct DropTailQueue<T> {
    capacity_bytes: u64,
    items: VecDeque<(T, u32)>,
    bytes: u64,
    stats: QueueStats,
}

impl<T> DropTailQueue<T> {
    pub fn new(capacity_bytes: u64) -> Self {
        DropTailQueue {
            capacity_bytes,
            items: VecDeque::new(),
            bytes: 0,
            stats: QueueStats::default(),
        }
    }

    /// Offers a packet of `bytes`; hands it back if the queue is full.
    pub fn offer(&mut self, item: T, bytes: u32) -> Result<(), T> {
        self.stats.arrivals += 1;
        if self.bytes + u64::from(bytes) > self.capacity_bytes {
            self.stats.drops += 1;
            return Err(item);
        }
        self.items.push_back((item, bytes));
        self.bytes += u64::from(bytes);
        self.stats.max_resident = self.stats.max_resident.max(self.items.len());
        self.stats.max_bytes = self.stats.max_bytes.max(self.bytes);
        Ok(())
    }

    /// Size of the head packet, i.e. the one in service.
    pub fn head_bytes(&self) -> Option<u32> {
        self.items.front().map(|(_, b)| *b)
    }

    pub fn pop(&mut self) -> Option<T> {
        let (item, bytes) = self.items.pop_front()?;
        self.bytes -= u64::from(bytes);
        self.stats.departures += 1;
        Some(item)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }

    /// `arrivals == departures + drops + resident`.
    pub fn conserved(&self) -> bool {
        self.stats.arrivals == self.stats.departures + self.stats.drops + self.items.len() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_and_droptail() {
        let mut q = DropTailQueue::new(50);
        assert!(q.offer(1, 10).is_ok());
        assert!(q.offer(2, 20).is_ok());
        assert_eq!(q.offer(3, 30), Err(3));
        assert_eq!(q.bytes(), 30);
        assert_eq!(q.head_bytes(), Some(10));
        assert_eq!(q.pop(), Some(1));
        assert!(q.offer(4, 30).is_ok());
        assert_eq!(q.bytes(), 50);
        assert_eq!(q.pop(), Some(2));
        assert_eq!(q.pop(), Some(4));
        assert_eq!(q.pop(), None);
        let s = q.stats();
        assert_eq!((s.arrivals, s.departures, s.drops, s.max_resident), (4, 3, 1, 2));
        assert_eq!(s.max_bytes, 50);
        assert!(q.conserved());
    }
}
