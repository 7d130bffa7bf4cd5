#include <immintrin.h>

void s212(int n, int *a, int *b, int *c, int *d) {
  int i;
  __m256i a_vec, b_vec, c_vec, a_next_vec, d_vec, prod_vec, sum_vec;
  for (i = 0; i < n-1 - (n-1) % 8; i += 8) {
    a_vec = _mm256_loadu_si256((__m256i *) &a[i]);
    b_vec = _mm256_loadu_si256((__m256i *) &b[i]);
    c_vec = _mm256_loadu_si256((__m256i *) &c[i]);
    a_next_vec = _mm256_loadu_si256((__m256i *) &a[i+1]);
    d_vec = _mm256_loadu_si256((__m256i *) &d[i]);
    prod_vec = _mm256_mullo_epi32(a_vec, c_vec);
    _mm256_storeu_si256((__m256i *) &a[i], prod_vec);
    prod_vec = _mm256_mullo_epi32(a_next_vec, d_vec);
    sum_vec = _mm256_add_epi32(b_vec, prod_vec);
    _mm256_storeu_si256((__m256i *) &b[i], sum_vec);
  }
  for (; i < n-1; i++){
    a[i] *= c[i];
    b[i] += a[i + 1] * d[i];
  }
}
