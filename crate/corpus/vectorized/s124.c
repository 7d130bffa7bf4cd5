#include <immintrin.h>

void s124(int *a, int *b, int *c, int *d, int *e, int n) {
  int j = 0;
  __m256i increment = _mm256_set1_epi32(1);
  __m256i zero = _mm256_setzero_si256();
  for (int i = 0; i < n; i+=8) {
    __m256i vbi = _mm256_loadu_si256((__m256i *)&b[i]);
    __m256i vci = _mm256_loadu_si256((__m256i *)&c[i]);
    __m256i vdi = _mm256_loadu_si256((__m256i *)&d[i]);
    __m256i vei = _mm256_loadu_si256((__m256i *)&e[i]);
    __m256i vprod = _mm256_mullo_epi32(vdi, vei);
    __m256i vsum_b = _mm256_add_epi32(vbi, vprod);
    __m256i vsum_c = _mm256_add_epi32(vci, vprod);
    __m256i vmask = _mm256_cmpgt_epi32(vbi, zero);

    __m256i va = _mm256_blendv_epi8(vsum_c, vsum_b, vmask);
    _mm256_storeu_si256((__m256i *)&a[j], va);
    j+=8;
  }
}
