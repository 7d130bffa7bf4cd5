#include <immintrin.h>

void vadd1(int n, int *a, int *b) {
    for (int i = 0; i < n; i += 8) {
        __m256i b_vec = _mm256_loadu_si256((__m256i *)(b + i));
        __m256i one_vec = _mm256_set1_epi32(1);
        __m256i result_vec = _mm256_add_epi32(b_vec, one_vec);
        _mm256_storeu_si256((__m256i *)(a + i), result_vec);
    }
}
