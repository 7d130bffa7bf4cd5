void s1112(int n, int *a, int *b) {
    for (int i = n - 1; i >= 0; i--) {
        a[i] = b[i] + 1;
    }
}
