/// Values indexed by lattice sites (or edges), stored densely over the
/// range touched so far. Reads outside the stored range return the default.
#[derive(Debug, Clone)]
pub struct SiteVec<T> {
    // Site held at `data[0]`.
    origin: i64,
    data: Vec<T>,
    default: T,
}

impl<T: Copy> SiteVec<T> {
    pub fn new(default: T) -> Self {
        Self {
            origin: 0,
            data: Vec::new(),
            default,
        }
    }

    #[inline]
    pub fn get(&self, site: i64) -> T {
        let idx = site.wrapping_sub(self.origin);
        if idx >= 0 && (idx as usize) < self.data.len() {
            self.data[idx as usize]
        } else {
            self.default
        }
    }

    #[inline]
    pub fn get_mut(&mut self, site: i64) -> &mut T {
        let idx = self.reserve(site);
        &mut self.data[idx]
    }

    #[inline]
    pub fn set(&mut self, site: i64, value: T) {
        *self.get_mut(site) = value;
    }

    /// Lowest and highest stored sites, if any.
    pub fn stored_range(&self) -> Option<(i64, i64)> {
        if self.data.is_empty() {
            None
        } else {
            Some((self.origin, self.origin + self.data.len() as i64 - 1))
        }
    }

    /// Stored `(site, value)` pairs in increasing site order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.origin + i as i64, *v))
    }

    #[inline]
    fn reserve(&mut self, site: i64) -> usize {
        if self.data.is_empty() {
            self.origin = site;
            self.data.push(self.default);
            return 0;
        }
        let mut idx = site - self.origin;
        if idx < 0 {
            self.grow_left((-idx) as usize);
            idx = site - self.origin;
        }
        let idx = idx as usize;
        if idx >= self.data.len() {
            let extra = (idx + 1 - self.data.len()).max(self.data.len());
            self.data.resize(self.data.len() + extra, self.default);
        }
        idx
    }

    #[cold]
    fn grow_left(&mut self, needed: usize) {
        let extra = needed.max(self.data.len());
        let mut grown = vec![self.default; extra];
        grown.extend_from_slice(&self.data);
        self.data = grown;
        self.origin -= extra as i64;
    }
}
